"""Closed-form and series results for heralding probability and log-negativity.

These formulas are independent of the block engine and serve both as a
fast path for optimisation and as a cross-check of it. The ``*_params``
functions broadcast over numpy arrays; the ``Config``-based wrappers return
:class:`~subtract_sim.entanglement.Metrics`.

Notation per arm: ``a2`` kept fraction alpha^2, ``g2`` lost fraction
gamma^2, and the detected fraction is ``1 - a2 - g2``. Primed quantities
(``a2p``, ``g2p``) refer to the second arm.
"""
from __future__ import annotations

import math
import warnings
from typing import NamedTuple

import numpy as np

from .entanglement import Metrics, make_metrics
from .errors import DomainError, PrecisionWarning
from .model import Config
from .special import jacobi, legendre

SERIES_TOL = 1e-15
SERIES_CAP = 200_000


class LossAliases(NamedTuple):
    """Shorthands for lossy symmetric formulas: x = 1 - a2*lam, y = (a2+g2)*lam."""

    x: float
    y: float
    y_prime: float

    @classmethod
    def of(cls, cfg: Config):
        lam = cfg.lam
        return cls(1.0 - cfg.arm.alpha2 * lam,
                   (cfg.arm.alpha2 + cfg.arm.gamma2) * lam,
                   (cfg.arm_prime.alpha2 + cfg.arm_prime.gamma2) * lam)


def _detected(a2, g2):
    # same snap as ModeParams.from_fractions: subtraction residue is no tap at all
    b2 = np.clip(1.0 - np.asarray(a2, dtype=float) - g2, 0.0, 1.0)
    return np.where(b2 <= 4 * np.finfo(float).eps, 0.0, b2)


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


# ---------------------------------------------------------------------------
# PNRD


def pnrd_probability_params(lam, a2, g2, a2p, g2p, t, t_prime):
    """P(t, t') for photon-number-resolving detection, any losses.

    Arms are exchanged internally when ``t > t_prime``.
    """
    if t > t_prime:
        return pnrd_probability_params(lam, a2p, g2p, a2, g2, t_prime, t)
    lam = np.asarray(lam, dtype=float)
    b2, b2p = _detected(a2, g2), _detected(a2p, g2p)
    s1 = np.asarray(a2, dtype=float) + g2
    s2 = np.asarray(a2p, dtype=float) + g2p
    u = s1 * s2 * lam * lam
    shift = t_prime - t
    out = ((1.0 - lam * lam) * lam ** (2 * t_prime) * b2p ** t_prime * b2 ** t * s1 ** shift
           / (1.0 - u) ** (t_prime + 1) * jacobi(t, shift, 0, (1.0 + u) / (1.0 - u)))
    return _unwrap(out)


def pnrd_probability(cfg: Config, t=None, t_prime=None):
    """Heralding probability of detecting exactly (t, t') photons."""
    if t is None or t_prime is None:
        if cfg.strategy.kind != "pnrd":
            raise DomainError("pnrd_probability needs a PNRD strategy or explicit counts")
        t, t_prime = cfg.strategy.t, cfg.strategy.t_prime
    return pnrd_probability_params(cfg.lam, cfg.arm.alpha2, cfg.arm.gamma2,
                                   cfg.arm_prime.alpha2, cfg.arm_prime.gamma2, t, t_prime)


def symmetric_params(lam, a2, g2, t):
    """(P, E_N) for t photons detected on both of two identical arms.

    With ``g2 = 0`` this is the lossless Legendre form; otherwise the lossy
    form in x = 1 - a2*lam, y = (a2+g2)*lam.
    """
    lam = np.asarray(lam, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    b2 = _detected(a2, g2)
    x = 1.0 - a2 * lam
    y = (a2 + g2) * lam
    gl = np.asarray(g2, dtype=float) * lam
    y2 = y * y
    dx = x * x - gl * gl
    p_arg = legendre(t, (1.0 + y2) / (1.0 - y2))
    prob = (1.0 - lam * lam) * b2 ** (2 * t) * lam ** (2 * t) / (1.0 - y2) ** (t + 1) * p_arg
    with np.errstate(divide="ignore", invalid="ignore"):
        en = ((t + 1) * np.log2((1.0 - y2) / dx)
              + np.log2(legendre(t, (x * x + gl * gl) / dx)) - np.log2(p_arg))
    return _unwrap(prob), _unwrap(en)


def asymmetric_lossless_params(lam, a2, a2p, t, t_prime, tol=SERIES_TOL):
    """(P, E_N) for lossless PNRD detection of (t, t') photons.

    E_N is an exact series in ``lam * alpha * alpha'`` that is summed
    until the next term is below ``tol`` times the partial sum. For
    ``t == t_prime`` the series is summed in closed form.
    """
    if t > t_prime:
        return asymmetric_lossless_params(lam, a2p, a2, t_prime, t, tol)
    lam = np.asarray(lam, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    a2p = np.asarray(a2p, dtype=float)
    prob = pnrd_probability_params(lam, a2, 0.0, a2p, 0.0, t, t_prime)
    u = a2 * a2p * lam * lam
    shift = t_prime - t
    x = lam * np.sqrt(a2 * a2p)
    with np.errstate(divide="ignore", invalid="ignore"):
        head = (t_prime + 1) * np.log2(1.0 - u) - np.log2(jacobi(t, shift, 0, (1.0 + u) / (1.0 - u)))
        if shift == 0:
            log2_series = -(t + 1) * np.log2(1.0 - x)
        else:
            log2_series = _log2_skew_series(x, t, t_prime, tol)
    return _unwrap(prob), _unwrap(head + 2.0 * log2_series)


def _log2_skew_series(x, t, t_prime, tol):
    """log2 of sum_i x^i (i+t')! / sqrt(i! (i+t'-t)! t! t'!)."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    shift = t_prime - t
    log_first = (math.lgamma(t_prime + 1)
                 - 0.5 * (math.lgamma(shift + 1) + math.lgamma(t + 1) + math.lgamma(t_prime + 1)))
    term = np.ones_like(x)
    total = np.ones_like(x)
    live = np.flatnonzero(x > 0)
    i = 0
    while live.size:
        if i >= SERIES_CAP:
            warnings.warn("skew-diagonal series cap exceeded", PrecisionWarning)
            break
        ratio = x[live] * (i + t_prime + 1) / math.sqrt((i + 1) * (i + shift + 1))
        term[live] *= ratio
        total[live] += term[live]
        i += 1
        done = (ratio < 1) & (term[live] <= tol * total[live])
        live = live[~done]
    return ((log_first + np.log(total)) / math.log(2.0)).reshape(shape)


def _check_pnrd(cfg):
    if cfg.strategy.kind != "pnrd":
        raise DomainError("closed forms here require PNRD detection")
    return cfg.strategy.t, cfg.strategy.t_prime


def lossless_symmetric(cfg: Config, t=None) -> Metrics:
    """Metrics for lossless, identical arms with t photons detected on each."""
    st, stp = _check_pnrd(cfg)
    t = st if t is None else t
    if not cfg.lossless:
        raise DomainError("lossless_symmetric called with loss; use lossy_symmetric")
    if cfg.arm != cfg.arm_prime or st != stp or t != st:
        raise DomainError("lossless_symmetric needs identical arms and t == t'")
    prob, en = symmetric_params(cfg.lam, cfg.arm.alpha2, 0.0, t)
    return make_metrics(prob, en, cfg.lam)


def lossless_asymmetric(cfg: Config, t=None, t_prime=None) -> Metrics:
    """Metrics for lossless PNRD detection of (t, t'); arms may differ."""
    st, stp = _check_pnrd(cfg)
    t = st if t is None else t
    t_prime = stp if t_prime is None else t_prime
    if not cfg.lossless:
        raise DomainError("lossless_asymmetric called with loss")
    prob, en = asymmetric_lossless_params(cfg.lam, cfg.arm.alpha2, cfg.arm_prime.alpha2,
                                          t, t_prime)
    return make_metrics(prob, en, cfg.lam)


def lossy_symmetric(cfg: Config, t=None) -> Metrics:
    """Metrics for identical lossy arms with t photons detected on each."""
    st, stp = _check_pnrd(cfg)
    t = st if t is None else t
    if cfg.arm != cfg.arm_prime or st != stp or t != st:
        raise DomainError("lossy_symmetric needs identical arms (including losses) and t == t'")
    prob, en = symmetric_params(cfg.lam, cfg.arm.alpha2, cfg.arm.gamma2, t)
    return make_metrics(prob, en, cfg.lam)


def closed_form_metrics(cfg: Config):
    """Metrics from a closed form when one applies, else ``None``."""
    if cfg.strategy.kind != "pnrd":
        return None
    if cfg.lossless:
        return lossless_asymmetric(cfg)
    if cfg.arm == cfg.arm_prime and cfg.strategy.symmetric:
        return lossy_symmetric(cfg)
    return None


# ---------------------------------------------------------------------------
# threshold detectors


def apd_probabilities_params(lam, a2, g2, a2p, g2p):
    """(P(off,off), P(off,on), P(on,off), P(on,on)) for single-photon thresholds."""
    lam = np.asarray(lam, dtype=float)
    y = (np.asarray(a2, dtype=float) + g2) * lam
    yp = (np.asarray(a2p, dtype=float) + g2p) * lam
    one = 1.0 - lam * lam
    p_off_off = one / (1.0 - y * yp)
    p_off_on = one * y * (lam - yp) / ((1.0 - y * lam) * (1.0 - y * yp))
    p_on_off = one * yp * (lam - y) / ((1.0 - yp * lam) * (1.0 - y * yp))
    p_on_on = ((y - lam) * (yp - lam) * (1.0 - y * yp * lam * lam)
               / ((1.0 - y * lam) * (1.0 - yp * lam) * (1.0 - y * yp)))
    return tuple(_unwrap(p) for p in (p_off_off, p_off_on, p_on_off, p_on_on))


def _marginal(lam, a2, g2, t):
    """Probability that one arm alone detects exactly t photons."""
    b2 = _detected(a2, g2)
    q = lam * lam * b2
    return (1.0 - lam * lam) * q ** t / (1.0 - lam * lam * (1.0 - b2)) ** (t + 1)


def apd_probabilities(cfg: Config):
    """The four click-pattern probabilities of ``cfg``'s arms.

    For a threshold of one photon these are closed forms; higher
    thresholds (multiplexed detectors) are summed from the finitely many
    "off" photon counts.
    """
    lam, arm, armp = cfg.lam, cfg.arm, cfg.arm_prime
    th = cfg.strategy.threshold if cfg.strategy.kind == "apd" else 1
    if th == 1:
        return apd_probabilities_params(lam, arm.alpha2, arm.gamma2, armp.alpha2, armp.gamma2)
    both_off = math.fsum(
        pnrd_probability_params(lam, arm.alpha2, arm.gamma2, armp.alpha2, armp.gamma2, t, tp)
        for t in range(th) for tp in range(th))
    first_off = math.fsum(_marginal(lam, arm.alpha2, arm.gamma2, t) for t in range(th))
    second_off = math.fsum(_marginal(lam, armp.alpha2, armp.gamma2, t) for t in range(th))
    p_off_on = first_off - both_off
    p_on_off = second_off - both_off
    return both_off, p_off_on, p_on_off, 1.0 - both_off - p_off_on - p_on_off


def apd_probability(cfg: Config):
    """Probability of the click pattern named by ``cfg.strategy``."""
    if cfg.strategy.kind != "apd":
        raise DomainError("apd_probability needs an APD strategy")
    idx = {("off", "off"): 0, ("off", "on"): 1, ("on", "off"): 2, ("on", "on"): 3}
    return apd_probabilities(cfg)[idx[cfg.strategy.pattern]]


# ---------------------------------------------------------------------------
# reference curves


def empirical_fit_alpha_opt(lam):
    """Quadratic reference curve for the rate-optimal alpha^2 (t = 1, lossless)."""
    lam = np.asarray(lam, dtype=float)
    return _unwrap(0.238 * (lam - 1.0) ** 2 + 0.576 * (lam - 1.0) + 1.0)


def empirical_fit_lossy(gamma2):
    """Reference curves (alpha_opt, lambda_opt) versus combined loss (t = 1).

    Published as an empirical fit; comparison with the optimiser shows the
    first value tracks the optimal alpha^2 (not alpha).
    """
    g = np.asarray(gamma2, dtype=float) + 0.1
    alpha_opt = np.exp(-38.1 * g) - 0.6 * np.asarray(gamma2, dtype=float) + 0.8
    lam_opt = np.exp(-107.1 * g * g) + np.exp(-2.8 * g) - 0.2
    return _unwrap(alpha_opt), _unwrap(lam_opt)
