"""Block-diagonal form of the partially transposed, heralded two-mode state.

The partial transpose (on the first kept mode) of the unnormalised
heralded state splits into blocks labelled by K = 0, 1, 2, ...; block K is a
real symmetric (K+1) x (K+1) matrix ``C^(K)``. Each entry is a sum over the
detected photon numbers (d, d') allowed by the strategy and over the number
of photons l lost from the first arm. The global factor (1 - lam^2) is kept
outside the blocks as ``BlockSet.prefactor``.

Unbounded detection ranges ("on" clicks) are never summed term by term in
:func:`assemble`. Summing d over all of [0, inf) is the same as merging the
detected channel into the loss channel (beta^2 + gamma^2 lost, nothing
detected), so an "on" range is that merged term minus the finitely many
excluded counts.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, PrecisionWarning, UnsupportedStructureError
from .model import Config, DetectionRange, ModeParams

# Rescale running sums before they can overflow.
_RESCALE_AT = 1e250


@dataclass(frozen=True)
class BlockSet:
    """Blocks of the partially transposed unnormalised state.

    ``blocks[K]`` holds ``C^(K)``; for a reduced asymmetric set
    (``shift != 0``) it holds ``B^(Kbar)`` with ``Kbar = K - |shift|``.
    """

    prefactor: float
    blocks: tuple
    k_max: int
    config: Optional[Config] = None
    shift: int = 0

    def __len__(self):
        return len(self.blocks)

    def trace(self):
        return self.prefactor * math.fsum(float(np.trace(b)) for b in self.blocks)

    def diagonal_sums(self):
        return np.array([np.trace(b) for b in self.blocks])


# ---------------------------------------------------------------------------
# reference path: one coefficient at a time, direct sums in log space


def _plog(power, x):
    """power * ln(x) with the convention 0 * ln(0) = 0."""
    if power == 0:
        return 0.0
    if x <= 0.0:
        return -math.inf
    return power * math.log(x)


def _log_term(K, i, j, l, d, dp, lam, arm, armp):
    m = i + j - K + l + d - dp
    return (_plog(i + j + 2 * (l + d), lam)
            + _plog(i + j, arm.alpha2) / 2 + _plog(2 * K - i - j, armp.alpha2) / 2
            + _plog(d, arm.beta2) + _plog(dp, armp.beta2)
            + _plog(l, arm.gamma2) + _plog(m, armp.gamma2)
            + math.lgamma(i + l + d + 1) + math.lgamma(j + l + d + 1)
            - math.lgamma(l + 1) - math.lgamma(m + 1)
            - math.lgamma(d + 1) - math.lgamma(dp + 1)
            - (math.lgamma(i + 1) + math.lgamma(j + 1)
               + math.lgamma(K - i + 1) + math.lgamma(K - j + 1)) / 2)


def _logaddexp(a, b):
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a > b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def _converging_sum(log_terms, log_tol, cap, lead=0):
    """Sum of exp(log_terms) until a term falls below tol x sum on the way down.

    Up to ``lead`` leading zero terms are skipped: with a lossless arm the
    support of a sum can start a few indices in.
    """
    acc = -math.inf
    prev = math.inf
    for n, lt in enumerate(log_terms):
        if n >= cap:
            warnings.warn("series cap reached before convergence", PrecisionWarning)
            break
        acc = _logaddexp(acc, lt)
        if acc == -math.inf and n >= lead:
            break
        if lt <= prev and lt < acc + log_tol:
            break
        prev = lt
    return acc


def coefficient(K, i, j, cfg: Config, d_range=None, d_prime_range=None):
    """One entry ``C_{i,j}^{(K)}`` by direct summation.

    Sums d and d' over their ranges (open ranges term by term) and l from
    ``l0 = max(0, K + d' - d - i - j)`` upward; every term is assembled in
    log space. This is the slow reference path that :func:`assemble` is
    checked against.
    """
    if not (0 <= i <= K and 0 <= j <= K):
        raise DomainError(f"indices ({i}, {j}) outside block K={K}")
    r1, r2 = cfg.strategy.ranges()
    d_range = DetectionRange(*d_range) if d_range is not None else r1
    d_prime_range = DetectionRange(*d_prime_range) if d_prime_range is not None else r2
    lam, arm, armp = cfg.lam, cfg.arm, cfg.arm_prime
    log_tol = math.log(cfg.truncation.l_max_rel_tol)
    cap = 10 * cfg.truncation.k_max
    # a non-zero term, if any, appears within this many steps of a range start
    counts = [r.lo if r.hi is None else r.hi for r in (d_range, d_prime_range)]
    lead = K + max(counts) + 1

    def l_sum(d, dp):
        l0 = max(0, K + dp - d - i - j)
        terms = (_log_term(K, i, j, l, d, dp, lam, arm, armp) for l in range(l0, l0 + cap + 1))
        return _converging_sum(terms, log_tol, cap, lead)

    def d_values(rng):
        stop = rng.lo + cap if rng.hi is None else rng.hi + 1
        return range(rng.lo, stop)

    def dp_sum(d):
        terms = (l_sum(d, dp) for dp in d_values(d_prime_range))
        if d_prime_range.open:
            return _converging_sum(terms, log_tol, cap, lead)
        return _sum_all(terms)

    terms = (dp_sum(d) for d in d_values(d_range))
    total = _converging_sum(terms, log_tol, cap, lead) if d_range.open else _sum_all(terms)
    return math.exp(total) if total > -math.inf else 0.0


def _sum_all(log_terms):
    acc = -math.inf
    for lt in log_terms:
        acc = _logaddexp(acc, lt)
    return acc


# ---------------------------------------------------------------------------
# vectorised path


@lru_cache(maxsize=64)
def _upper_indices(k_lo, k_hi):
    """Flattened (K, i, j) with i <= j for K in [k_lo, k_hi]."""
    ks, is_, js = [], [], []
    for K in range(k_lo, k_hi + 1):
        i, j = np.triu_indices(K + 1)
        ks.append(np.full(i.size, K))
        is_.append(i)
        js.append(j)
    out = tuple(np.concatenate(a) for a in (ks, is_, js))
    for a in out:
        a.setflags(write=False)
    return out


def _arm_terms(rng: DetectionRange, mp: ModeParams):
    """Signed fixed-count terms (sign, d, alpha2, beta2, gamma2) reproducing a range."""
    if rng.hi is not None:
        return [(1.0, d, mp.alpha2, mp.beta2, mp.gamma2) for d in range(rng.lo, rng.hi + 1)]
    merged = [(1.0, 0, mp.alpha2, 0.0, min(1.0, mp.beta2 + mp.gamma2))]
    return merged + [(-1.0, d, mp.alpha2, mp.beta2, mp.gamma2) for d in range(rng.lo)]


_LOG_FACT = gammaln(np.arange(1, 4097, dtype=float))


def _log_factorial_table(n):
    global _LOG_FACT
    if n >= _LOG_FACT.size:
        _LOG_FACT = gammaln(np.arange(1, 2 * n + 2, dtype=float))
    return _LOG_FACT


def _power_log(power, x):
    """power * ln(x) elementwise for a scalar x, with 0 * ln(0) = 0."""
    if x > 0.0:
        return power * math.log(x)
    return np.where(power == 0, 0.0, -np.inf)


def _fixed_count_entries(lam, term, term_p, K, I, J, shared, rel_tol, cap):
    """Entries for fixed detected counts (d, d'), vectorised over (K, i, j).

    ``shared`` carries the log of the factors common to every (d, d') pair:
    the kept-mode powers and the square-rooted factorials.
    """
    _, d, _, b2, g2 = term
    _, dp, _, b2p, g2p = term_p
    l0 = np.maximum(0, K + dp - d - I - J)
    m0 = I + J - K + l0 + d - dp
    lf = _log_factorial_table(int(K.max() + l0.max() + d + dp) + 2 if K.size else 2)
    with np.errstate(invalid="ignore"):
        log_t0 = (shared + _power_log(I + J + 2 * (l0 + d), lam)
                  + _power_log(l0, g2) + _power_log(m0, g2p)
                  + lf[I + l0 + d] + lf[J + l0 + d] - lf[l0] - lf[m0]
                  + (_power_log(d, b2) + _power_log(dp, b2p) - lf[d] - lf[dp]))
    r = lam * lam * g2 * g2p
    log_sum = np.zeros(K.size)
    if r > 0.0:
        live = np.flatnonzero(np.isfinite(log_t0))
        num_a = (I[live] + l0[live] + d + 1).astype(float)
        num_b = (J[live] + l0[live] + d + 1).astype(float)
        den_l = (l0[live] + 1).astype(float)
        den_m = (m0[live] + 1).astype(float)
        term_rel = np.ones(live.size)
        s = np.ones(live.size)
        base = np.zeros(live.size)
        for it in range(cap):
            if live.size == 0:
                break
            ratio = (r * num_a) * num_b / (den_l * den_m)
            term_rel *= ratio
            s += term_rel
            num_a += 1
            num_b += 1
            den_l += 1
            den_m += 1
            if it % 4:
                continue
            # ratios decrease monotonically in l, so the current one bounds the tail
            done = (ratio < 1) & (term_rel * ratio <= rel_tol * s * (1 - ratio))
            big = s > _RESCALE_AT
            if big.any():
                base[big] += np.log(s[big])
                term_rel[big] /= s[big]
                s[big] = 1.0
            if done.any():
                log_sum[live[done]] = base[done] + np.log(s[done])
                keep = ~done
                live, term_rel, s, base = live[keep], term_rel[keep], s[keep], base[keep]
                num_a, num_b, den_l, den_m = num_a[keep], num_b[keep], den_l[keep], den_m[keep]
        if live.size:
            warnings.warn(f"loss sum unconverged for {live.size} entries after {cap} terms",
                          PrecisionWarning)
            log_sum[live] = base + np.log(s)
    with np.errstate(under="ignore"):
        return np.exp(log_t0 + log_sum)


def _block_values(cfg: Config, k_lo, k_hi):
    """Signed combination of fixed-count entries for K in [k_lo, k_hi]."""
    K, I, J = _upper_indices(k_lo, k_hi)
    r1, r2 = cfg.strategy.ranges()
    rel_tol = cfg.truncation.l_max_rel_tol
    cap = 10 * cfg.truncation.k_max
    lf = _log_factorial_table(k_hi + 1)
    with np.errstate(invalid="ignore"):
        shared = (0.5 * _power_log(I + J, cfg.arm.alpha2)
                  + 0.5 * _power_log(2 * K - I - J, cfg.arm_prime.alpha2)
                  - 0.5 * (lf[I] + lf[J] + lf[K - I] + lf[K - J]))
    vals = np.zeros(K.size)
    for term in _arm_terms(r1, cfg.arm):
        for term_p in _arm_terms(r2, cfg.arm_prime):
            sign = term[0] * term_p[0]
            vals += sign * _fixed_count_entries(cfg.lam, term, term_p, K, I, J, shared,
                                                rel_tol, cap)
    # inclusion-exclusion can leave rounding-level negatives
    np.maximum(vals, 0.0, out=vals)
    blocks = []
    pos = 0
    for k in range(k_lo, k_hi + 1):
        n = (k + 1) * (k + 2) // 2
        blk = np.zeros((k + 1, k + 1))
        iu = _triu(k + 1)
        blk[iu] = vals[pos:pos + n]
        blk.T[iu] = vals[pos:pos + n]
        blocks.append(blk)
        pos += n
    return blocks


@lru_cache(maxsize=512)
def _triu(n):
    return np.triu_indices(n)


def default_k_max(lam, tail_tol=1e-12, cap=200):
    """Smallest K with lam^K below ``tail_tol``, capped."""
    if lam == 0.0:
        return 0
    return min(cap, max(1, math.ceil(math.log(tail_tol) / math.log(lam))))


def assemble(cfg: Config, k_max: Optional[int] = None) -> BlockSet:
    """All blocks needed to represent the heralded state of ``cfg``.

    With ``k_max=None`` the number of blocks starts at
    :func:`default_k_max` and grows by 25% until the geometric tail
    estimate of the discarded blocks drops below ``tail_tol`` of the
    accumulated weight, never exceeding ``truncation.k_max``.
    """
    pol = cfg.truncation
    if k_max is not None:
        blocks = _block_values(cfg, 0, int(k_max))
        return BlockSet(1.0 - cfg.lam ** 2, tuple(blocks), int(k_max), cfg)
    cap = pol.k_max
    k = default_k_max(cfg.lam, pol.tail_tol, cap)
    blocks = _block_values(cfg, 0, k)
    while k < cap:
        sizes = np.array([np.abs(b).sum() for b in blocks])
        total = sizes.sum()
        if total == 0.0 or _tail_estimate(sizes) <= pol.tail_tol * total:
            break
        k_new = min(cap, k + max(1, math.ceil(0.25 * k)))
        blocks += _block_values(cfg, k + 1, k_new)
        k = k_new
    else:
        sizes = np.array([np.abs(b).sum() for b in blocks])
        if _tail_estimate(sizes) > pol.tail_tol * sizes.sum():
            warnings.warn(f"block truncation reached k_max={cap} before the tail "
                          f"fell below {pol.tail_tol:g}", PrecisionWarning)
    return BlockSet(1.0 - cfg.lam ** 2, tuple(blocks), k, cfg)


def _tail_estimate(sizes):
    """Geometric extrapolation of the weight beyond the last block."""
    if len(sizes) < 2 or sizes[-1] == 0.0:
        return 0.0
    if sizes[-2] == 0.0:
        return math.inf
    q = sizes[-1] / sizes[-2]
    return math.inf if q >= 1.0 else sizes[-1] * q / (1.0 - q)


def reduce_asymmetric(bs: BlockSet, t, t_prime) -> BlockSet:
    """Collapse lossless PNRD blocks onto their single non-zero skew diagonal.

    For ``t <= t_prime`` the non-zero entries of ``C^(K)`` satisfy
    ``i + j = K + t_prime - t``; the square submatrix
    ``B_{i,j} = C_{i+s, j+s}`` (``s = t_prime - t``) carries all of them on its
    main skew diagonal, making it symmetric and persymmetric. For
    ``t > t_prime`` the top-left submatrix plays the same role.
    """
    cfg = bs.config
    if cfg is None or not cfg.lossless or cfg.strategy.kind != "pnrd":
        raise UnsupportedStructureError("reduction needs a lossless PNRD block set")
    if (cfg.strategy.t, cfg.strategy.t_prime) != (t, t_prime):
        raise DomainError("detection counts do not match the block set")
    s = t_prime - t
    if s == 0:
        return bs
    reduced = []
    for K, blk in enumerate(bs.blocks):
        kbar = K - abs(s)
        if kbar < 0:
            continue
        reduced.append(blk[s:, s:].copy() if s > 0 else blk[:kbar + 1, :kbar + 1].copy())
    return BlockSet(bs.prefactor, tuple(reduced), bs.k_max - abs(s), cfg, shift=s)
