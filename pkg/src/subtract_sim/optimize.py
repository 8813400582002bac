"""Maximise the entanglement gain rate over squeezing and tap settings.

Two search methods are offered. ``"grid"`` evaluates a coarse grid and
then repeatedly re-grids a shrinking box around the incumbent; it is the
default whenever the objective has a vectorised closed form. ``"local"``
runs a bounded Nelder-Mead search from a seed and is used for
configurations that need the block engine, where each evaluation costs
milliseconds rather than microseconds.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .entanglement import Metrics
from .errors import ConfigError, ImpossibleEventError
from .evaluate import evaluate, grid_values, has_closed_form
from .model import Config, ModeParams, Strategy, TruncationPolicy

DIMS = ("lambda", "alpha2", "alpha2_prime")
LAMBDA_BOUNDS = (1e-3, 0.95)
OBJECTIVES = ("rate", "gain")
# Looser than the default policy but still far below the rate differences
# being compared; roughly halves the cost of each block-engine evaluation.
FRONTIER_TRUNCATION = TruncationPolicy(tail_tol=1e-10, l_max_rel_tol=1e-12)


@dataclass(frozen=True)
class OptimizationResult:
    """Best point found by :func:`maximize_rate`.

    ``metrics`` is ``None`` only if the best point is an impossible
    event (every evaluated point had zero heralding probability).
    """

    lambda_opt: float
    alpha2_opt: float
    alpha2_prime_opt: float
    metrics: Optional[Metrics]
    strategy: Strategy
    losses: tuple
    evaluations: int
    below_threshold: bool
    objective: str = "rate"

    @property
    def value(self):
        if self.metrics is None:
            return -math.inf
        return getattr(self.metrics, self.objective)

    def as_dict(self):
        return {
            "lambda_opt": self.lambda_opt,
            "alpha2_opt": self.alpha2_opt,
            "alpha2_prime_opt": self.alpha2_prime_opt,
            "metrics": None if self.metrics is None else self.metrics.as_dict(),
            "strategy": self.strategy.label,
            "losses": list(self.losses),
            "evaluations": self.evaluations,
            "below_threshold": self.below_threshold,
            "objective": self.objective,
        }


@dataclass
class _Problem:
    strategy: Strategy
    gamma2: float
    gamma2_prime: float
    free: tuple
    fixed: dict
    bounds: dict
    tied: bool
    objective: str
    truncation: TruncationPolicy
    evaluations: int = 0
    best: tuple = field(default=(-math.inf, math.inf, math.inf, None))

    def unpack(self, cols):
        """Map free-coordinate arrays to (lam, alpha2, alpha2_prime)."""
        vals = dict(self.fixed)
        vals.update(zip(self.free, cols))
        a2 = vals["alpha2"]
        a2p = a2 if self.tied else vals["alpha2_prime"]
        return vals["lambda"], a2, a2p

    @property
    def vectorised(self):
        return has_closed_form(self.strategy, self.gamma2, self.gamma2_prime, self.tied)

    def values(self, cols):
        """Objective on broadcast free-coordinate arrays (-inf where impossible)."""
        lam, a2, a2p = self.unpack(cols)
        lam, a2, a2p = np.broadcast_arrays(np.asarray(lam, float), np.asarray(a2, float),
                                           np.asarray(a2p, float))
        _, gain, _, rate = grid_values(self.strategy, self.gamma2, self.gamma2_prime,
                                       lam, a2, a2p, tied=self.tied, truncation=self.truncation)
        self.evaluations += lam.size
        obj = rate if self.objective == "rate" else np.where(np.isnan(gain), -np.inf, gain)
        obj = np.where(np.isnan(obj), -np.inf, obj)
        self._offer(obj, lam, a2, np.stack([np.broadcast_to(c, lam.shape) for c in cols]))
        return obj

    def _offer(self, obj, lam, a2, pts):
        """Keep the best point seen, ties going to smaller alpha2 then smaller lambda."""
        order = np.lexsort((lam.ravel(), a2.ravel(), -obj.ravel()))
        k = order[0]
        cand = (float(obj.ravel()[k]), float(a2.ravel()[k]), float(lam.ravel()[k]))
        b = self.best
        if (cand[0] > b[0] or (cand[0] == b[0] and (cand[1], cand[2]) < (b[1], b[2]))):
            self.best = cand + (pts.reshape(len(self.free), -1)[:, k].copy(),)


def _resolve_losses(losses):
    if isinstance(losses, (int, float)):
        g, gp = float(losses), None
    else:
        g, gp = losses
    g = float(g)
    gp = g if gp is None else float(gp)
    for v in (g, gp):
        if not 0.0 <= v < 1.0:
            raise ConfigError(f"loss fractions must lie in [0, 1), got {v!r}")
    return g, gp


def _problem(strategy, losses, free, fixed, bounds, objective, truncation):
    if objective not in OBJECTIVES:
        raise ConfigError(f"objective must be one of {OBJECTIVES}")
    g, gp = _resolve_losses(losses)
    unknown = (set(free) | set(fixed or {})) - set(DIMS)
    if unknown:
        raise ConfigError(f"unknown parameter(s) {sorted(unknown)}")
    free = tuple(d for d in DIMS if d in set(free))
    if not free:
        raise ConfigError("at least one parameter must be free")
    fixed = {k: float(v) for k, v in (fixed or {}).items() if k not in free}
    tied = False
    if "alpha2" not in free and "alpha2" not in fixed:
        if strategy.detects_nothing(0):
            fixed["alpha2"] = 1.0 - g
        else:
            raise ConfigError("alpha2 must be free or fixed")
    if "alpha2_prime" not in free and "alpha2_prime" not in fixed:
        if strategy.detects_nothing(1):
            fixed["alpha2_prime"] = 1.0 - gp
        elif g == gp and "alpha2" in free:
            tied = True
        elif g == gp:
            fixed["alpha2_prime"] = fixed["alpha2"]
        else:
            raise ConfigError("alpha2_prime must be free or fixed when the arms' losses differ")
    if "lambda" not in free and "lambda" not in fixed:
        raise ConfigError("lambda must be free or fixed")
    box = {"lambda": LAMBDA_BOUNDS, "alpha2": (0.0, 1.0 - g), "alpha2_prime": (0.0, 1.0 - gp)}
    for k, (lo, hi) in (bounds or {}).items():
        if k not in DIMS:
            raise ConfigError(f"bounds given for unknown parameter {k!r}")
        dlo, dhi = box[k]
        lo, hi = max(float(lo), dlo), min(float(hi), dhi)
        if not lo <= hi:
            raise ConfigError(f"empty bounds for {k}")
        box[k] = (lo, hi)
    return _Problem(strategy, g, gp, free, fixed, box, tied, objective,
                    truncation or TruncationPolicy())


def _grid_search(prob: _Problem, points, rounds, refine_points):
    axes = [np.linspace(*prob.bounds[d], points) for d in prob.free]
    cols = np.meshgrid(*axes, indexing="ij")
    prob.values(cols)
    half = np.array([(prob.bounds[d][1] - prob.bounds[d][0]) / max(points - 1, 1)
                     for d in prob.free])
    offsets = np.linspace(-1.0, 1.0, refine_points)
    for _ in range(rounds):
        centre = prob.best[3]
        if centre is None:
            break
        axes = []
        for k, d in enumerate(prob.free):
            lo, hi = prob.bounds[d]
            axes.append(np.unique(np.clip(centre[k] + half[k] * offsets, lo, hi)))
        prob.values(np.meshgrid(*axes, indexing="ij"))
        half = half / 4.0


def _seed(prob: _Problem, seed_points):
    """Score a coarse seed grid; lambda is spaced geometrically.

    Near a loss threshold the productive region shrinks towards small
    squeezing, which an evenly spaced lambda axis would step over.
    """
    axes = []
    for d in prob.free:
        lo, hi = prob.bounds[d]
        if d == "lambda":
            axes.append(np.geomspace(max(lo, 0.03), max(min(hi, 0.7), max(lo, 0.03)),
                                     seed_points))
        else:
            # stay off the edges, where the objective is often degenerate
            axes.append(np.linspace(lo, hi, seed_points + 2)[1:-1])
    prob.values(np.meshgrid(*axes, indexing="ij"))


def _local_search(prob: _Problem, starts, seed_points, xatol, fatol):
    """Nelder-Mead from the best of the warm starts and a coarse seed grid."""
    lo = np.array([prob.bounds[d][0] for d in prob.free])
    hi = np.array([prob.bounds[d][1] for d in prob.free])
    if starts is not None:
        pts = np.clip(np.atleast_2d(np.asarray(starts, dtype=float)), lo, hi)
        prob.values(list(pts.T))
    if starts is None or seed_points > 0:
        _seed(prob, max(seed_points, 2))
    if prob.best[3] is None:
        return

    def f(x):
        v = float(prob.values([np.asarray(c) for c in x]))
        return -v if math.isfinite(v) else 1e300

    minimize(f, prob.best[3], method="Nelder-Mead", bounds=list(zip(lo, hi)),
             options={"xatol": xatol, "fatol": fatol, "maxiter": 2000})


def maximize_rate(strategy: Strategy, losses=(0.0, None), free=("lambda", "alpha2"),
                  fixed=None, bounds=None, points=64, rounds=6, refine_points=9,
                  objective="rate", method="auto", start=None, seed_points=6,
                  xatol=1e-5, fatol=1e-12, truncation=None) -> OptimizationResult:
    """Maximise the rate (or gain) over the free parameters.

    Parameters
    ----------
    strategy : Strategy
        Detection scheme, held fixed.
    losses : float or (float, float)
        Lost fractions ``(gamma2, gamma2_prime)``; a single value or
        ``None`` for the second applies the same loss to both arms.
    free : iterable of str
        Subset of ``{"lambda", "alpha2", "alpha2_prime"}``.
    fixed : dict, optional
        Values for parameters that are not free. When ``alpha2_prime``
        is neither free nor fixed it is set to ``1 - gamma2_prime`` if the
        second arm heralds on zero photons, and tied to ``alpha2`` if both
        arms have equal loss.
    bounds : dict, optional
        Per-parameter ``(lo, hi)``, intersected with the physical box
        ``lambda in [1e-3, 0.95]``, ``alpha2 in [0, 1 - gamma2]``.
    points, rounds, refine_points : int
        Grid-search resolution: a ``points``-per-axis coarse grid, then
        ``rounds`` refinements on ``refine_points`` per axis, the box
        shrinking fourfold each round.
    method : {"auto", "grid", "local"}
        ``"auto"`` picks the grid when a vectorised closed form exists.
    start : array_like, optional
        Warm start(s) for the local search, one point per row, coordinates
        ordered like ``free``. The search begins from the best of these
        and a ``seed_points``-per-axis seed grid (``seed_points=0`` skips
        the grid when a start is given).

    Returns
    -------
    OptimizationResult
    """
    prob = _problem(strategy, losses, free, fixed, bounds, objective, truncation)
    if method == "auto":
        method = "grid" if prob.vectorised else "local"
    if method == "grid":
        _grid_search(prob, int(points), int(rounds), int(refine_points))
    elif method == "local":
        _local_search(prob, start, int(seed_points), xatol, fatol)
    else:
        raise ConfigError(f"unknown optimisation method {method!r}")
    return _result(prob)


def _result(prob: _Problem) -> OptimizationResult:
    pt = prob.best[3]
    if pt is None:
        pt = np.array([prob.bounds[d][0] for d in prob.free])
    lam, a2, a2p = (float(v) for v in prob.unpack(list(pt)))
    cfg = Config(lam, ModeParams.from_fractions(a2, prob.gamma2),
                 ModeParams.from_fractions(a2p, prob.gamma2_prime), prob.strategy,
                 prob.truncation)
    try:
        m = evaluate(cfg)
    except ImpossibleEventError:
        m = None
    value = -math.inf if m is None else getattr(m, prob.objective)
    return OptimizationResult(lam, a2, a2p, m, prob.strategy,
                              (prob.gamma2, prob.gamma2_prime), prob.evaluations,
                              below_threshold=not value > 0.0, objective=prob.objective)


# ---------------------------------------------------------------------------
# loss threshold


def _free_for(strategy: Strategy, gamma2, gamma2_prime):
    free = ["lambda"]
    if not strategy.detects_nothing(0):
        free.append("alpha2")
    if not strategy.detects_nothing(1) and (gamma2 != gamma2_prime or not strategy.symmetric):
        free.append("alpha2_prime")
    if "alpha2" not in free and "alpha2_prime" not in free:
        raise ConfigError("strategy heralds on nothing; there is nothing to optimise")
    return tuple(free)


def max_gain(strategy: Strategy, gamma2, gamma2_prime=None, **kw) -> OptimizationResult:
    """Largest gain over (lambda, alpha2[, alpha2_prime]) at fixed losses."""
    gp = gamma2 if gamma2_prime is None else gamma2_prime
    return maximize_rate(strategy, (gamma2, gp), free=_free_for(strategy, gamma2, gp),
                         objective="gain", **kw)


def loss_threshold(strategy: Strategy, direction="symmetric", tol=1e-3, upper=0.999,
                   **kw) -> float:
    """Largest loss for which subtraction can still raise entanglement.

    Bisects on gamma2 for the root of the maximal gain. ``direction`` is
    ``"symmetric"`` (both arms lose gamma2), ``"first"`` or ``"second"``
    (only that arm is lossy). Returns ``upper`` if the gain stays positive
    throughout, and 0 if it is not positive even without loss.
    """
    if direction not in ("symmetric", "first", "second"):
        raise ConfigError("direction must be 'symmetric', 'first' or 'second'")

    def losses(g):
        return {"symmetric": (g, g), "first": (g, 0.0), "second": (0.0, g)}[direction]

    def positive(g):
        return max_gain(strategy, *losses(g), **kw).value > 0.0

    lo, hi = 0.0, float(upper)
    if not positive(lo):
        return 0.0
    if positive(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# strategy comparison over losses


@dataclass(frozen=True)
class FrontierResult:
    """Optimised rates of several strategies over a grid of losses.

    ``rates[s, i, j]`` belongs to ``strategies[s]`` at
    ``(gamma2[i], gamma2_prime[j])``; ``best[i, j]`` indexes the winner and
    ``difference`` is the rate of the first strategy minus the second.
    """

    strategies: tuple
    gamma2: np.ndarray
    gamma2_prime: np.ndarray
    rates: np.ndarray
    best: np.ndarray
    difference: np.ndarray
    results: tuple

    def winner(self, i, j):
        return self.strategies[int(self.best[i, j])]

    def as_dict(self):
        d = asdict(self)
        d["strategies"] = [s.label for s in self.strategies]
        d["results"] = [[[r.as_dict() for r in row] for row in grid] for grid in self.results]
        for k in ("gamma2", "gamma2_prime", "rates", "best", "difference"):
            d[k] = np.asarray(d[k]).tolist()
        return d


def _mirrored(res: OptimizationResult) -> OptimizationResult:
    """The same optimum with the arms exchanged."""
    return replace(res, alpha2_opt=res.alpha2_prime_opt, alpha2_prime_opt=res.alpha2_opt,
                   losses=tuple(reversed(res.losses)), strategy=res.strategy.swapped())


def _start_from(res: OptimizationResult, free):
    vals = {"lambda": res.lambda_opt, "alpha2": res.alpha2_opt,
            "alpha2_prime": res.alpha2_prime_opt}
    return [vals[d] for d in free]


def optimise_cell(strategy, gamma2, gamma2_prime, neighbours=(), **kw):
    """Optimise one loss cell, warm-started from neighbouring optima."""
    free = _free_for(strategy, gamma2, gamma2_prime)
    starts = [_start_from(n, free) for n in neighbours if n is not None]
    return maximize_rate(strategy, (gamma2, gamma2_prime), free=free,
                         start=starts or None, **kw)


def strategy_frontier(strategies, gamma2_grid, gamma2_prime_grid=None, **kw) -> FrontierResult:
    """Best strategy per loss cell, each at its own optimised parameters.

    Cells are visited row by row; each local search starts from the
    optima of the already-solved cells to the left and above. Extra
    keyword arguments go to :func:`maximize_rate`; the local-search
    tolerance defaults to ``xatol=1e-3`` (the rate error is quadratic in
    the parameter error), the seed grid to 3 points per axis and the
    truncation to :data:`FRONTIER_TRUNCATION`. For strategies that treat
    both arms alike on a square grid only the upper triangle is optimised
    and the rest mirrored.
    """
    kw.setdefault("xatol", 1e-3)
    kw.setdefault("fatol", 1e-11)
    kw.setdefault("seed_points", 3)
    kw.setdefault("truncation", FRONTIER_TRUNCATION)
    strategies = tuple(Strategy.parse(s) if isinstance(s, str) else s for s in strategies)
    if not strategies:
        raise ConfigError("at least one strategy is required")
    g1 = np.asarray(gamma2_grid, dtype=float).ravel()
    g2 = g1 if gamma2_prime_grid is None else np.asarray(gamma2_prime_grid, dtype=float).ravel()
    rates = np.empty((len(strategies), g1.size, g2.size))
    results = []
    square = g1.size == g2.size and np.array_equal(g1, g2)
    for s, strat in enumerate(strategies):
        grid = [[None] * g2.size for _ in range(g1.size)]
        mirror = square and strat.symmetric
        for i in range(g1.size):
            for j in range(g2.size):
                if mirror and j < i:
                    grid[i][j] = _mirrored(grid[j][i])
                    rates[s, i, j] = rates[s, j, i]
                    continue
                nb = (grid[i][j - 1] if j else None, grid[i - 1][j] if i else None)
                r = optimise_cell(strat, g1[i], g2[j], nb, **kw)
                grid[i][j] = r
                rates[s, i, j] = r.value
        results.append(tuple(tuple(row) for row in grid))
    best = np.argmax(rates, axis=0)
    diff = rates[0] - rates[1] if len(strategies) > 1 else np.zeros(rates.shape[1:])
    return FrontierResult(strategies, g1, g2, rates, best, diff, tuple(results))
