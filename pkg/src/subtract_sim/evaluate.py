"""Route a configuration to the fastest exact evaluation path."""
from __future__ import annotations

import numpy as np

from . import analytic
from .blocks import assemble
from .entanglement import Metrics, metrics, tmss_log_negativity
from .errors import DomainError, ImpossibleEventError
from .model import Config, ModeParams, Strategy, TruncationPolicy

ROUTES = ("auto", "analytic", "blocks")


def evaluate(cfg: Config, route="auto") -> Metrics:
    """Metrics of ``cfg``.

    ``route="auto"`` uses a closed form when one exists and the block
    engine otherwise; ``"analytic"`` insists on a closed form and
    ``"blocks"`` always assembles blocks.
    """
    if route not in ROUTES:
        raise ValueError(f"route must be one of {ROUTES}")
    if cfg.lam == 0.0:
        raise DomainError("gain undefined at zero squeezing")
    if route != "blocks":
        found = analytic.closed_form_metrics(cfg)
        if found is not None:
            return found
        if route == "analytic":
            raise DomainError("no closed form for this configuration")
    return metrics(assemble(cfg), cfg.lam)


def has_closed_form(strategy: Strategy, gamma2, gamma2_prime, tied):
    """Whether grid evaluation can be vectorised.

    ``tied`` means the two kept fractions are equal at every point.
    """
    if strategy.kind != "pnrd":
        return False
    if gamma2 == 0.0 and gamma2_prime == 0.0:
        return True
    return tied and gamma2 == gamma2_prime and strategy.symmetric


def grid_values(strategy: Strategy, gamma2, gamma2_prime, lam, alpha2, alpha2_prime,
                tied=False, truncation=None):
    """Evaluate (E_N, gain, probability, rate) on broadcast parameter arrays.

    Points where the event is impossible get probability 0 and NaN
    entanglement; the rate there is set to ``-inf`` so optimisers skip
    them.
    """
    lam, alpha2, alpha2_prime = np.broadcast_arrays(
        np.asarray(lam, dtype=float), np.asarray(alpha2, dtype=float),
        np.asarray(alpha2_prime, dtype=float))
    if has_closed_form(strategy, gamma2, gamma2_prime, tied):
        t, tp = strategy.t, strategy.t_prime
        with np.errstate(all="ignore"):
            if gamma2 == 0.0 and gamma2_prime == 0.0 and not (tied and t == tp):
                prob, en = analytic.asymmetric_lossless_params(lam, alpha2, alpha2_prime, t, tp)
            else:
                prob, en = analytic.symmetric_params(lam, alpha2, gamma2, t)
            prob = np.asarray(prob, dtype=float) * np.ones_like(lam)
            en = np.asarray(en, dtype=float) * np.ones_like(lam)
            base = np.log2((1.0 + lam) / (1.0 - lam))
            gain = en / base - 1.0
        bad = ~(prob > 0.0) | ~np.isfinite(en)
        en = np.where(bad, np.nan, en)
        gain = np.where(bad, np.nan, gain)
        rate = np.where(bad, -np.inf, prob * gain)
        return en, gain, np.where(bad, 0.0, prob), rate
    out = np.empty((4,) + lam.shape)
    for idx in np.ndindex(lam.shape):
        out[(slice(None),) + idx] = point_values(strategy, gamma2, gamma2_prime, lam[idx],
                                                 alpha2[idx], alpha2_prime[idx], truncation)
    return out[0], out[1], out[2], out[3]


def point_values(strategy, gamma2, gamma2_prime, lam, alpha2, alpha2_prime, truncation=None):
    """Single-point version of :func:`grid_values` returning a 4-tuple."""
    try:
        cfg = Config(float(lam), ModeParams.from_fractions(float(alpha2), gamma2),
                     ModeParams.from_fractions(float(alpha2_prime), gamma2_prime),
                     strategy, truncation or TruncationPolicy())
        m = evaluate(cfg)
    except ImpossibleEventError:
        return np.nan, np.nan, 0.0, -np.inf
    return m.log_negativity, m.gain, m.probability, m.rate


__all__ = ["evaluate", "grid_values", "point_values", "has_closed_form",
           "tmss_log_negativity"]
