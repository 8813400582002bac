"""Brute-force reference: explicit Fock expansion at a small photon cut-off.

The output state of both arms is written out in occupation coordinates
(kept e, detected d, lost l) per arm, the detected modes are projected,
the lost modes traced, and E_N follows from a dense partial transpose.
Nothing here shares code with the block engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entanglement import Metrics, make_metrics
from .errors import ImpossibleEventError, ResourceError
from .model import Config, DetectionRange, Strategy

MEMORY_BUDGET = 512 * 2 ** 20


@dataclass(frozen=True)
class JointAmplitudeTable:
    """Truncated output amplitudes of the two-arm state.

    ``amp[n, e, d, e2, d2]`` is the amplitude of pair number ``n`` ending
    in kept/detected counts ``(e, d)`` on the first arm and ``(e2, d2)``
    on the second; the lost counts are ``n - e - d`` and ``n - e2 - d2``.
    Entries with negative lost counts are zero.
    """

    amp: np.ndarray
    n_max: int
    lam: float

    @property
    def norm_squared(self):
        return float(np.sum(self.amp ** 2))


def _footprint(n_max):
    dim = n_max + 1
    # amplitude table, two masked working copies, dense density matrix
    return 8 * (3 * dim ** 5 + 2 * dim ** 4)


def _arm_weights(n_max, mp):
    """w[n, e, d] = sqrt(n! / (e! d! l!)) alpha^e beta^d gamma^l, l = n-e-d."""
    dim = n_max + 1
    w = np.zeros((dim, dim, dim))
    for n in range(dim):
        for e in range(n + 1):
            for d in range(n + 1 - e):
                l = n - e - d
                multi = math.comb(n, e) * math.comb(n - e, d)
                w[n, e, d] = (math.sqrt(multi) * mp.alpha ** e * mp.beta ** d * mp.gamma ** l)
    return w


def expand_state(cfg: Config, n_max=None) -> JointAmplitudeTable:
    """Expand the heralding-ready output state up to ``n_max`` pairs."""
    n_max = cfg.truncation.n_max if n_max is None else int(n_max)
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if _footprint(n_max) > MEMORY_BUDGET:
        raise ResourceError(f"n_max={n_max} exceeds the oracle memory budget")
    lam = cfg.lam
    n = np.arange(n_max + 1)
    pair = math.sqrt(1.0 - lam * lam) * lam ** n
    w1 = _arm_weights(n_max, cfg.arm)
    w2 = _arm_weights(n_max, cfg.arm_prime)
    amp = pair[:, None, None, None, None] * w1[:, :, :, None, None] * w2[:, None, None, :, :]
    return JointAmplitudeTable(amp, n_max, lam)


def _mask(rng: DetectionRange, dim):
    d = np.arange(dim)
    return (d >= rng.lo) & ((d <= rng.hi) if rng.hi is not None else True)


def conditioned_density(table: JointAmplitudeTable, strategy: Strategy = None):
    """Unnormalised two-mode density matrix after detection and loss.

    Returns a ``(D*D, D*D)`` array with ``D = n_max + 1`` and row index
    ``e * D + e2``. ``strategy=None`` keeps every detection outcome.

    Tracing the lost modes pairs amplitudes whose lost counts agree, so
    an entry ``<e, e2| rho |e + s, e2 + s>`` collects pair numbers
    ``n`` and ``n + s``; entries with unequal shifts on the two modes
    vanish.
    """
    dim = table.n_max + 1
    if strategy is None:
        ranges = (DetectionRange(0, None), DetectionRange(0, None))
    else:
        ranges = strategy.ranges()
    keep = _mask(ranges[0], dim)[:, None] & _mask(ranges[1], dim)[None, :]
    amp = table.amp * keep[None, None, :, None, :]
    rho = np.zeros((dim, dim, dim, dim))
    idx = np.arange(dim)
    for s in range(dim):
        m = dim - s
        lo = amp[:m, :m, :, :m, :]
        hi = amp[s:, s:, :, s:, :]
        block = np.einsum("naibj,naibj->ab", lo, hi)
        e, e2 = np.meshgrid(idx[:m], idx[:m], indexing="ij")
        rho[e, e2, e + s, e2 + s] = block
        rho[e + s, e2 + s, e, e2] = block
    return rho.reshape(dim * dim, dim * dim)


def partial_transpose(rho, dim):
    """Transpose the first mode of a ``(dim^2, dim^2)`` two-mode operator."""
    r = rho.reshape(dim, dim, dim, dim)
    return r.transpose(2, 1, 0, 3).reshape(dim * dim, dim * dim)


def oracle_metrics(rho, lam) -> Metrics:
    """Metrics of an unnormalised dense two-mode density matrix."""
    rho = np.asarray(rho, dtype=float)
    dim = math.isqrt(rho.shape[0])
    if dim * dim != rho.shape[0]:
        raise ValueError("density matrix size must be a perfect square")
    trace = float(np.trace(rho))
    if not trace > 0.0:
        raise ImpossibleEventError("impossible event: heralded state has zero trace")
    ev = np.linalg.eigvalsh(partial_transpose(rho, dim))
    norm = float(np.abs(ev).sum())
    return make_metrics(trace, math.log2(norm / trace), lam)


def oracle_evaluate(cfg: Config, n_max=None) -> Metrics:
    """Expand, condition on ``cfg.strategy`` and score in one call."""
    table = expand_state(cfg, n_max)
    return oracle_metrics(conditioned_density(table, cfg.strategy), cfg.lam)
