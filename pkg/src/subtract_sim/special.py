"""Special functions used by the closed forms and the block engine.

Factorials and multinomials are handled in natural-log space; the
orthogonal polynomials are evaluated by upward three-term recurrence,
which is stable for the arguments met here (z >= 1).
"""
import math

import numpy as np
from scipy.special import gammaln

from .errors import DomainError


def log_gamma(x):
    """Return ln Gamma(x) for a finite, strictly positive real ``x``."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"log_gamma requires a finite positive argument, got {x!r}")
    return math.lgamma(x)


def log_factorial(n):
    """ln n! for a non-negative integer or an integer-valued array."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise DomainError("log_factorial requires non-negative arguments")
    out = gammaln(n + 1.0)
    return float(out) if out.ndim == 0 else out


def log_multinomial(*parts):
    """ln of the multinomial coefficient (sum(parts); parts...)."""
    if any(int(p) != p or p < 0 for p in parts):
        raise DomainError("multinomial parts must be non-negative integers")
    total = sum(int(p) for p in parts)
    return math.lgamma(total + 1) - sum(math.lgamma(int(p) + 1) for p in parts)


def _check_degree(n):
    if int(n) != n or n < 0:
        raise DomainError(f"polynomial degree must be a non-negative integer, got {n!r}")
    return int(n)


def legendre(n, z):
    """Legendre polynomial P_n(z).

    Uses ``(k+1) P_{k+1} = (2k+1) z P_k - k P_{k-1}``. Accepts scalar or
    array ``z``; the return type follows the input.
    """
    n = _check_degree(n)
    z = _check_argument(z)
    p_prev = np.ones_like(z)
    if n == 0:
        return _unwrap(p_prev)
    p = z.copy()
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * z * p - k * p_prev) / (k + 1)
    return _unwrap(p)


def jacobi(n, a, b, z):
    """Jacobi polynomial P_n^{(a,b)}(z) for non-negative integer a, b.

    Parameters
    ----------
    n : int
        Degree.
    a, b : int
        Non-negative integer indices.
    z : float or ndarray
        Evaluation point(s).

    Returns
    -------
    float or ndarray
        ``P_n^{(a,b)}(z)``; reduces to :func:`legendre` for a = b = 0.
    """
    n = _check_degree(n)
    a = _check_degree(a)
    b = _check_degree(b)
    z = _check_argument(z)
    p_prev = np.ones_like(z)
    if n == 0:
        return _unwrap(p_prev)
    p = (a + 1) + (a + b + 2) * (z - 1) / 2
    for k in range(2, n + 1):
        s = 2 * k + a + b
        c1 = 2 * k * (k + a + b) * (s - 2)
        c2 = (s - 1) * (s * (s - 2) * z + a * a - b * b)
        c3 = 2 * (k + a - 1) * (k + b - 1) * s
        p_prev, p = p, (c2 * p - c3 * p_prev) / c1
    return _unwrap(p)


def _check_argument(z):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("polynomial argument must be finite")
    return z


def _unwrap(arr):
    return float(arr) if np.ndim(arr) == 0 else arr
