"""Log-negativity, gain, probability and rate from a :class:`BlockSet`."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .blocks import BlockSet
from .errors import DomainError, ImpossibleEventError, UnsupportedStructureError
from .model import check_squeezing

EIG_TOL = 1e-14


@dataclass(frozen=True)
class Metrics:
    """Figures of merit for one heralded configuration.

    ``log_negativity`` and ``baseline_log_negativity`` are in bits.
    """

    log_negativity: float
    negativity: float
    gain: float
    probability: float
    rate: float
    baseline_log_negativity: float

    def as_dict(self):
        return asdict(self)


def tmss_log_negativity(lam):
    """Log-negativity (bits) of the two-mode squeezed vacuum: log2((1+lam)/(1-lam))."""
    lam = check_squeezing(lam)
    return math.log2((1.0 + lam) / (1.0 - lam))


def make_metrics(probability, log_negativity, lam) -> Metrics:
    """Assemble :class:`Metrics` from a heralding probability and E_N."""
    lam = check_squeezing(lam)
    if lam == 0.0:
        raise DomainError("gain undefined at zero squeezing")
    if not probability > 0.0:
        raise ImpossibleEventError("impossible event: heralding probability is zero")
    base = tmss_log_negativity(lam)
    gain = log_negativity / base - 1.0
    return Metrics(log_negativity=log_negativity,
                   negativity=(2.0 ** log_negativity - 1.0) / 2.0,
                   gain=gain,
                   probability=probability,
                   rate=probability * gain,
                   baseline_log_negativity=base)


def jacobi_eigenvalues(a, tol=EIG_TOL, max_sweeps=60):
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius mass drops below
    ``tol * ||a||_F``. Returned in ascending order.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if n == 1:
        return a.ravel().copy()
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, np.sum(a * a) - np.sum(np.diag(a) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                diff = a[q, q] - a[p, p]
                # negligible next to both diagonal entries: drop it
                if abs(apq) <= 1e-18 * min(abs(a[p, p]), abs(a[q, q])) or apq == 0.0:
                    a[p, q] = a[q, p] = 0.0
                    continue
                if abs(diff) > 1e150 * abs(apq):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                a[:, p] = c * col_p - s * a[:, q]
                a[:, q] = s * col_p + c * a[:, q]
                row_p = a[p, :].copy()
                a[p, :] = c * row_p - s * a[q, :]
                a[q, :] = s * row_p + c * a[q, :]
    return np.sort(np.diag(a))


def block_trace_norm(block, method="lapack"):
    """Sum of absolute eigenvalues of one symmetric block."""
    if block.shape[0] == 1:
        return abs(float(block[0, 0]))
    if method == "lapack":
        ev = np.linalg.eigvalsh(block)
    elif method == "jacobi":
        ev = jacobi_eigenvalues(block)
    else:
        raise ValueError(f"unknown eigen method {method!r}")
    return float(np.abs(ev).sum())


def trace_and_norm(bs: BlockSet, method="lapack"):
    """Return ``(trace, trace_norm)`` of the unnormalised partial transpose."""
    trace = bs.trace()
    if not trace > 0.0:
        raise ImpossibleEventError("impossible event: heralded state has zero trace")
    norm = bs.prefactor * math.fsum(block_trace_norm(b, method) for b in bs.blocks)
    return trace, norm


def is_persymmetric(block, rtol=1e-12):
    scale = max(float(np.abs(block).max()), 1e-300)
    return bool(np.all(np.abs(block - block[::-1, ::-1]) <= rtol * scale))


def antidiagonal_log_negativity(bs: BlockSet):
    """E_N from the skew-diagonal traces of centrosymmetric blocks.

    Requires every block to be symmetric and persymmetric; raises
    :class:`UnsupportedStructureError` otherwise.
    """
    for K, blk in enumerate(bs.blocks):
        if not is_persymmetric(blk):
            raise UnsupportedStructureError(f"block {K} is not persymmetric")
    trace = bs.trace()
    if not trace > 0.0:
        raise ImpossibleEventError("impossible event: heralded state has zero trace")
    skew = math.fsum(float(np.trace(blk[::-1])) for blk in bs.blocks)
    return math.log2(bs.prefactor * skew / trace)


def log_negativity(bs: BlockSet, method="lapack"):
    trace, norm = trace_and_norm(bs, method)
    return math.log2(norm / trace)


def metrics(bs: BlockSet, lam=None, method="lapack") -> Metrics:
    """Metrics of the heralded state encoded by ``bs``."""
    if lam is None:
        lam = bs.config.lam
    if check_squeezing(lam) == 0.0:
        raise DomainError("gain undefined at zero squeezing")
    trace, norm = trace_and_norm(bs, method)
    return make_metrics(trace, math.log2(norm / trace), lam)
