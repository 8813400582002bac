"""Physical configuration: squeezing, per-arm mode fractions, detection strategy.

Each arm splits its photons into three channels: kept (fraction alpha^2),
detected (beta^2) and lost (gamma^2). Arms can be described either by
these fractions directly or by the four beam-splitter transmissivities of
the loss/subtraction chain; transmissivities are given as intensities
(T_i^2) and the amplitudes are derived.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigError, DomainError

SUM_TOL = 1e-12
# Fractions computed as 1 - a - b may undershoot zero by rounding.
_CLIP_TOL = 1e-12


def check_squeezing(lam):
    """Validate and return the squeezing parameter, 0 <= lam < 1."""
    lam = float(lam)
    if not (0.0 <= lam < 1.0):
        raise DomainError(f"squeezing parameter must lie in [0, 1), got {lam!r}")
    return lam


def _clip_fraction(x, name):
    if not math.isfinite(x) or x < -_CLIP_TOL or x > 1 + _CLIP_TOL:
        raise DomainError(f"{name} must lie in [0, 1], got {x!r}")
    return min(max(x, 0.0), 1.0)


@dataclass(frozen=True)
class ModeParams:
    """Fractions of an arm's photons routed to kept, detected and lost modes."""

    alpha2: float
    beta2: float
    gamma2: float

    def __post_init__(self):
        for name in ("alpha2", "beta2", "gamma2"):
            object.__setattr__(self, name, _clip_fraction(float(getattr(self, name)), name))
        total = self.alpha2 + self.beta2 + self.gamma2
        if abs(total - 1.0) > SUM_TOL:
            raise DomainError(f"alpha2 + beta2 + gamma2 must equal 1, got {total!r}")

    @classmethod
    def from_fractions(cls, alpha2, gamma2=0.0):
        """Build from the kept and lost fractions; the detected one fills the rest."""
        beta2 = 1.0 - alpha2 - gamma2
        # a few ulps left over from the subtraction mean "nothing detected"
        if abs(beta2) <= 4 * np.finfo(float).eps:
            beta2 = 0.0
        return cls(alpha2, beta2, gamma2)

    @property
    def alpha(self):
        return math.sqrt(self.alpha2)

    @property
    def beta(self):
        return math.sqrt(self.beta2)

    @property
    def gamma(self):
        return math.sqrt(self.gamma2)

    @property
    def lossless(self):
        return self.gamma2 == 0.0


@dataclass(frozen=True)
class ArmTransmissivities:
    """Amplitude transmissivities of the four beam splitters in one arm.

    ``T1`` models loss before subtraction, ``T2`` is the subtraction tap,
    ``T3`` the detector efficiency and ``T4`` loss after subtraction.
    """

    T1: float = 1.0
    T2: float = 1.0
    T3: float = 1.0
    T4: float = 1.0

    def __post_init__(self):
        for name in ("T1", "T2", "T3", "T4"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0.0 or v > 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_intensities(cls, T1_sq=1.0, T2_sq=1.0, T3_sq=1.0, T4_sq=1.0):
        """Build from intensity transmissivities T_i^2."""
        vals = []
        for name, v in zip(("T1", "T2", "T3", "T4"), (T1_sq, T2_sq, T3_sq, T4_sq)):
            v = float(v)
            if not math.isfinite(v) or v < 0.0 or v > 1.0:
                raise DomainError(f"{name}^2 must lie in [0, 1], got {v!r}")
            vals.append(math.sqrt(v))
        return cls(*vals)

    def reflectivity(self, i):
        """R_i = sqrt(1 - T_i^2) for i in 1..4."""
        t = getattr(self, f"T{i}")
        return math.sqrt(max(0.0, 1.0 - t * t))


def mode_coefficients(arm: ArmTransmissivities) -> ModeParams:
    """Map an arm's transmissivities to its (alpha^2, beta^2, gamma^2)."""
    t1, t2, t3, t4 = (arm.T1 ** 2, arm.T2 ** 2, arm.T3 ** 2, arm.T4 ** 2)
    r1, r2, r3, r4 = (1 - t1, 1 - t2, 1 - t3, 1 - t4)
    alpha2 = t1 * t2 * t4
    beta2 = t1 * r2 * t3
    gamma2 = r1 + t1 * (r2 * r3 + t2 * r4)
    # Rounding can leave the sum a few ulps from one; push the residue into gamma2.
    gamma2 += 1.0 - (alpha2 + beta2 + gamma2)
    return ModeParams(alpha2, beta2, gamma2)


def build_arm_unitary(arm: ArmTransmissivities) -> np.ndarray:
    """The real orthogonal 5x5 mode transformation of one arm.

    Rows/columns are ordered (input, S2, S3, S4, S5); only the first column
    matters for a vacuum-padded input. Its squared entries give
    ``alpha^2 = U[0,0]^2``, ``beta^2 = U[2,0]^2`` and
    ``gamma^2 = U[1,0]^2 + U[3,0]^2 + U[4,0]^2``.
    """
    T1, T2, T3, T4 = arm.T1, arm.T2, arm.T3, arm.T4
    R1, R2, R3, R4 = (arm.reflectivity(i) for i in (1, 2, 3, 4))
    return np.array([
        [T1 * T2 * T4, -R1 * T2 * T4, -R2 * T4, 0.0, -R4],
        [R1, T1, 0.0, 0.0, 0.0],
        [T1 * R2 * T3, -R1 * R2 * T3, T2 * T3, -R3, 0.0],
        [T1 * R2 * R3, -R1 * R2 * R3, T2 * R3, T3, 0.0],
        [T1 * T2 * R4, -R1 * T2 * R4, -R2 * R4, 0.0, T4],
    ])


class DetectionRange(NamedTuple):
    """Inclusive range of detected photon numbers; ``hi=None`` means unbounded."""

    lo: int
    hi: Optional[int]

    @property
    def open(self):
        return self.hi is None

    def __contains__(self, d):
        return d >= self.lo and (self.hi is None or d <= self.hi)


_PATTERNS = ("on", "off")


@dataclass(frozen=True)
class Strategy:
    """Detection scheme on the two tapped modes.

    For ``kind == "pnrd"`` the detectors resolve exactly ``t`` and
    ``t_prime`` photons. For ``kind == "apd"`` each detector reports
    ``"on"`` (at least ``threshold`` photons) or ``"off"``.
    """

    kind: str
    t: int = 0
    t_prime: int = 0
    pattern: tuple = ("off", "off")
    threshold: int = 1

    def __post_init__(self):
        if self.kind not in ("pnrd", "apd"):
            raise ConfigError(f"unknown detector kind {self.kind!r}")
        if self.kind == "pnrd":
            for name in ("t", "t_prime"):
                v = getattr(self, name)
                if int(v) != v or v < 0:
                    raise ConfigError(f"{name} must be a non-negative integer, got {v!r}")
                object.__setattr__(self, name, int(v))
        else:
            pat = tuple(str(p).strip().lower() for p in self.pattern)
            if len(pat) != 2 or any(p not in _PATTERNS for p in pat):
                raise ConfigError(f"APD pattern must be two of 'on'/'off', got {self.pattern!r}")
            object.__setattr__(self, "pattern", pat)
            if int(self.threshold) != self.threshold or self.threshold < 1:
                raise ConfigError("APD threshold must be a positive integer")
            object.__setattr__(self, "threshold", int(self.threshold))

    @classmethod
    def pnrd(cls, t, t_prime):
        return cls("pnrd", t=t, t_prime=t_prime)

    @classmethod
    def apd(cls, first, second, threshold=1):
        return cls("apd", pattern=(first, second), threshold=threshold)

    @classmethod
    def parse(cls, label: str) -> "Strategy":
        """Parse labels such as ``"pnrd_1_0"``, ``"(1,0)"``, ``"apd_on_off"`` or ``"on,off"``."""
        text = label.strip().lower()
        for prefix in ("pnrd", "apd"):
            if text.startswith(prefix):
                text = text[len(prefix):]
        parts = [p for p in text.replace("(", " ").replace(")", " ")
                 .replace(",", " ").replace("_", " ").replace(":", " ").split() if p]
        if len(parts) != 2:
            raise ConfigError(f"cannot parse strategy label {label!r}")
        if all(p in _PATTERNS for p in parts):
            return cls.apd(*parts)
        try:
            return cls.pnrd(int(parts[0]), int(parts[1]))
        except ValueError:
            raise ConfigError(f"cannot parse strategy label {label!r}") from None

    @property
    def label(self):
        if self.kind == "pnrd":
            return f"pnrd_{self.t}_{self.t_prime}"
        return f"apd_{self.pattern[0]}_{self.pattern[1]}"

    def ranges(self):
        """Detected-photon ranges on the two arms."""
        if self.kind == "pnrd":
            return DetectionRange(self.t, self.t), DetectionRange(self.t_prime, self.t_prime)
        th = self.threshold
        return tuple(DetectionRange(th, None) if p == "on" else DetectionRange(0, th - 1)
                     for p in self.pattern)

    def swapped(self):
        if self.kind == "pnrd":
            return Strategy.pnrd(self.t_prime, self.t)
        return Strategy.apd(self.pattern[1], self.pattern[0], self.threshold)

    @property
    def symmetric(self):
        return self.ranges()[0] == self.ranges()[1]

    def detects_nothing(self, arm):
        """True when arm 0 or 1 is heralded on zero detected photons."""
        return self.ranges()[arm] == DetectionRange(0, 0)


@dataclass(frozen=True)
class TruncationPolicy:
    """Cut-offs for the infinite sums.

    ``k_max`` caps the number of blocks, ``l_max_rel_tol`` stops the loss
    sums, ``n_max`` is the Fock cut-off of the brute-force oracle and
    ``tail_tol`` the admissible discarded fraction of the trace.
    """

    k_max: int = 200
    l_max_rel_tol: float = 1e-15
    n_max: int = 10
    tail_tol: float = 1e-12

    def __post_init__(self):
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ConfigError("k_max must be a positive integer")
        if not (0.0 < self.l_max_rel_tol <= 1e-6):
            raise ConfigError("l_max_rel_tol must lie in (0, 1e-6]")
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise ConfigError("n_max must be an integer >= 2")
        if not (0.0 < self.tail_tol < 1.0):
            raise ConfigError("tail_tol must lie in (0, 1)")


@dataclass(frozen=True)
class Config:
    """A complete physical configuration."""

    lam: float
    arm: ModeParams
    arm_prime: ModeParams
    strategy: Strategy
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)

    def __post_init__(self):
        object.__setattr__(self, "lam", check_squeezing(self.lam))
        st, n_max = self.strategy, self.truncation.n_max
        counts = (st.t, st.t_prime) if st.kind == "pnrd" else (st.threshold,)
        if max(counts) > n_max:
            raise ConfigError(f"detected photon counts {counts} exceed the truncation n_max={n_max}")

    @classmethod
    def from_fractions(cls, lam, alpha2, gamma2=0.0, alpha2_prime=None, gamma2_prime=None,
                       strategy=None, truncation=None):
        """Convenience constructor; primed values default to the unprimed ones."""
        if alpha2_prime is None:
            alpha2_prime = alpha2
        if gamma2_prime is None:
            gamma2_prime = gamma2
        return cls(lam,
                   ModeParams.from_fractions(alpha2, gamma2),
                   ModeParams.from_fractions(alpha2_prime, gamma2_prime),
                   strategy if strategy is not None else Strategy.pnrd(1, 1),
                   truncation if truncation is not None else TruncationPolicy())

    def swapped(self):
        """Exchange the roles of the two arms."""
        return replace(self, arm=self.arm_prime, arm_prime=self.arm,
                       strategy=self.strategy.swapped())

    def with_strategy(self, strategy):
        return replace(self, strategy=strategy)

    @property
    def lossless(self):
        return self.arm.lossless and self.arm_prime.lossless

    @property
    def degenerate_arms(self):
        """Arms identical and detection ranges identical."""
        return self.arm == self.arm_prime and self.strategy.symmetric
