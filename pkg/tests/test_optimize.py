import numpy as np
import pytest

from subtract_sim.analytic import empirical_fit_alpha_opt
from subtract_sim.errors import ConfigError
from subtract_sim.evaluate import point_values
from subtract_sim.model import Strategy
from subtract_sim.optimize import (FrontierResult, OptimizationResult, loss_threshold, max_gain,
                                   maximize_rate, strategy_frontier)

T1 = Strategy.pnrd(1, 1)


@pytest.fixture(scope="module")
def lossless_t1():
    return maximize_rate(T1)


def test_result_shape(lossless_t1):
    r = lossless_t1
    assert isinstance(r, OptimizationResult)
    assert r.alpha2_prime_opt == r.alpha2_opt
    assert not r.below_threshold
    assert r.value == r.metrics.rate > 0
    d = r.as_dict()
    assert d["strategy"] == "pnrd_1_1"
    assert set(d["metrics"]) >= {"rate", "gain", "probability"}


def test_deterministic(lossless_t1):
    again = maximize_rate(T1)
    assert again == lossless_t1


def test_optimum_dominates_finer_local_grid(lossless_t1):
    r = lossless_t1
    step = 2e-4 / 10
    lam = r.lambda_opt + step * np.arange(-10, 11)
    a2 = r.alpha2_opt + step * np.arange(-10, 11)
    best = max(point_values(T1, 0.0, 0.0, x, y, y)[3] for x in lam for y in a2)
    assert r.value >= best - 1e-6


def test_grid_and_local_search_agree(lossless_t1):
    local = maximize_rate(T1, method="local")
    assert local.value == pytest.approx(lossless_t1.value, abs=1e-6)
    assert local.lambda_opt == pytest.approx(lossless_t1.lambda_opt, abs=5e-3)


def test_alpha_opt_at_fixed_squeezing_follows_fit():
    r = maximize_rate(T1, free=("alpha2",), fixed={"lambda": 0.5})
    assert r.lambda_opt == 0.5
    assert r.alpha2_opt == pytest.approx(empirical_fit_alpha_opt(0.5), abs=0.02)


def test_unsubtracted_arm_keeps_everything():
    r = maximize_rate(Strategy.pnrd(1, 0))
    assert r.alpha2_prime_opt == 1.0
    lossy = maximize_rate(Strategy.pnrd(1, 0), losses=(0.1, 0.2))
    assert lossy.alpha2_prime_opt == pytest.approx(0.8)


def test_unsubtracted_arm_free_goes_to_one():
    r = maximize_rate(Strategy.pnrd(1, 0), free=("lambda", "alpha2", "alpha2_prime"),
                      method="local")
    assert r.alpha2_prime_opt == pytest.approx(1.0, abs=1e-3)


def test_heavy_loss_is_flagged_not_raised():
    r = maximize_rate(T1, losses=0.6)
    assert r.below_threshold
    assert r.value <= 0.0


def test_gain_objective_without_loss():
    r = max_gain(T1, 0.0)
    assert r.objective == "gain"
    assert r.value > 0.0


def test_loss_threshold_t1():
    assert loss_threshold(T1) == pytest.approx(0.5, abs=0.02)


@pytest.mark.parametrize("kw, match", [
    ({"free": ("beta",)}, "unknown"),
    ({"free": ()}, "free"),
    ({"objective": "fidelity"}, "objective"),
    ({"method": "anneal"}, "method"),
    ({"losses": (0.1, 0.2)}, "alpha2_prime"),
    ({"losses": 1.2}, "loss"),
    ({"bounds": {"lambda": (0.9, 0.1)}}, "empty"),
    ({"bounds": {"mu": (0, 1)}}, "unknown"),
    ({"free": ("alpha2",)}, "lambda"),
])
def test_configuration_errors(kw, match):
    with pytest.raises(ConfigError, match=match):
        maximize_rate(T1, **kw)


def test_loss_threshold_direction_checked():
    with pytest.raises(ConfigError):
        loss_threshold(T1, direction="diagonal")


def test_bounds_are_respected():
    r = maximize_rate(T1, bounds={"lambda": (0.2, 0.4)})
    assert 0.2 <= r.lambda_opt <= 0.4
    assert r.lambda_opt == pytest.approx(0.4)


def test_single_cell_frontier():
    f = strategy_frontier(["on,off", "on,on"], [0.0])
    assert isinstance(f, FrontierResult)
    assert f.rates.shape == (2, 1, 1)
    assert f.winner(0, 0) == Strategy.apd("on", "off")
    assert f.difference[0, 0] == f.rates[0, 0, 0] - f.rates[1, 0, 0] > 0
    assert f.as_dict()["strategies"] == ["apd_on_off", "apd_on_on"]


def test_frontier_mirrors_symmetric_strategies():
    f = strategy_frontier([T1], [0.0, 0.2])
    assert f.rates[0, 1, 0] == f.rates[0, 0, 1]
    mirrored, direct = f.results[0][1][0], f.results[0][0][1]
    assert mirrored.losses == (0.2, 0.0)
    assert mirrored.alpha2_opt == direct.alpha2_prime_opt


def test_frontier_needs_strategies():
    with pytest.raises(ConfigError):
        strategy_frontier([], [0.0])
