import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subtract_sim.blocks import BlockSet, assemble, reduce_asymmetric
from subtract_sim.entanglement import (Metrics, antidiagonal_log_negativity, block_trace_norm,
                                       jacobi_eigenvalues, log_negativity, make_metrics, metrics,
                                       tmss_log_negativity, trace_and_norm)
from subtract_sim.errors import (DomainError, ImpossibleEventError, PrecisionWarning,
                                 UnsupportedStructureError)
from subtract_sim.model import Config, Strategy, TruncationPolicy

from frozen import HAND_PNRD11

LAMBDAS = [0.1 * k for k in range(1, 10)]


def _cfg(lam, a2, g2=0.0, a2p=None, g2p=None, strategy=None):
    return Config.from_fractions(lam, a2, g2, a2p, g2p, strategy)


@pytest.mark.parametrize("lam, expected", [(0.0, 0.0), (1 / 3, 1.0), (0.5, math.log2(3))])
def test_tmss_log_negativity_examples(lam, expected):
    assert tmss_log_negativity(lam) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("bad", [-0.1, 1.0, 2.0])
def test_tmss_log_negativity_domain(bad):
    with pytest.raises(DomainError):
        tmss_log_negativity(bad)


@pytest.mark.parametrize("lam", LAMBDAS)
def test_unconditioned_state_recovers_tmss(lam):
    # alpha = 1: nothing tapped, nothing lost, "off" keeps every term.
    # Block K holds Fock weight lam^K, so lam = 0.9 needs more than the default 200 blocks.
    cfg = Config.from_fractions(lam, 1.0, strategy=Strategy.apd("off", "off"),
                                truncation=TruncationPolicy(k_max=400))
    trace, norm = trace_and_norm(assemble(cfg))
    assert trace == pytest.approx(1.0, abs=1e-12)
    assert norm == pytest.approx((1 + lam) / (1 - lam), rel=1e-10)
    m = metrics(assemble(cfg))
    assert m.log_negativity == pytest.approx(tmss_log_negativity(lam), abs=1e-10)
    assert m.gain == pytest.approx(0.0, abs=1e-10)
    assert m.rate == pytest.approx(0.0, abs=1e-10)


def test_hand_evaluated_metrics():
    m = metrics(assemble(_cfg(0.5, 0.8)))
    assert m.log_negativity == pytest.approx(HAND_PNRD11["log_negativity"], abs=1e-9)
    assert m.probability == pytest.approx(HAND_PNRD11["probability"], rel=1e-10)
    assert m.gain == pytest.approx(HAND_PNRD11["gain"], abs=1e-9)
    assert m.rate == pytest.approx(HAND_PNRD11["rate"], rel=1e-8)
    assert antidiagonal_log_negativity(assemble(_cfg(0.5, 0.8))) == pytest.approx(1.9792, abs=1e-4)


def test_metric_errors():
    with pytest.raises(DomainError, match="zero squeezing"):
        metrics(assemble(_cfg(0.0, 0.8)), 0.0)
    with pytest.raises(ImpossibleEventError, match="impossible event"):
        metrics(assemble(_cfg(0.5, 1.0)))
    with pytest.raises(ImpossibleEventError):
        make_metrics(0.0, 1.0, 0.5)


def test_zero_squeezing_vacuum_has_no_entanglement():
    bs = assemble(_cfg(0.0, 1.0, strategy=Strategy.apd("off", "off")))
    assert trace_and_norm(bs) == (1.0, 1.0)
    assert antidiagonal_log_negativity(bs) == 0.0


@given(st.floats(0.0, 5.0), st.floats(1e-3, 1.0), st.floats(0.01, 0.99))
def test_metrics_invariants(en, prob, lam):
    m = make_metrics(prob, en, lam)
    assert m.log_negativity == pytest.approx(math.log2(1 + 2 * m.negativity), abs=1e-10)
    assert m.rate == pytest.approx(m.probability * m.gain, abs=1e-12)
    assert 0.0 <= m.probability <= 1.0
    assert set(m.as_dict()) >= {"log_negativity", "gain", "probability", "rate"}


@st.composite
def configs(draw, symmetric=False):
    lam = draw(st.floats(0.05, 0.8))
    g2 = draw(st.floats(0.0, 0.4))
    a2 = draw(st.floats(0.2, 0.95)) * (1 - g2)
    if symmetric:
        strategy = draw(st.sampled_from([Strategy.pnrd(1, 1), Strategy.pnrd(2, 2),
                                         Strategy.apd("on", "on"), Strategy.apd("off", "off")]))
        return _cfg(lam, a2, g2, strategy=strategy)
    g2p = draw(st.floats(0.0, 0.4))
    a2p = draw(st.floats(0.2, 0.95)) * (1 - g2p)
    strategy = draw(st.sampled_from([Strategy.pnrd(1, 0), Strategy.pnrd(2, 1),
                                     Strategy.apd("on", "off"), Strategy.apd("on", "on")]))
    return _cfg(lam, a2, g2, a2p, g2p, strategy)


@settings(max_examples=40)
@given(configs())
def test_trace_norm_dominates_trace(cfg):
    trace, norm = trace_and_norm(assemble(cfg))
    assert norm >= trace * (1 - 1e-13)


@settings(max_examples=100)
@given(configs(symmetric=True))
def test_antidiagonal_path_matches_eigenvalues(cfg):
    bs = assemble(cfg)
    assert antidiagonal_log_negativity(bs) == pytest.approx(log_negativity(bs), abs=1e-9)


@pytest.mark.parametrize("t, tp", [(1, 0), (1, 2), (2, 0)])
def test_antidiagonal_path_on_reduced_asymmetric_blocks(t, tp):
    cfg = _cfg(0.6, 0.7, 0.0, 0.7, 0.0, Strategy.pnrd(t, tp))
    bs = assemble(cfg)
    red = reduce_asymmetric(bs, t, tp)
    assert antidiagonal_log_negativity(red) == pytest.approx(log_negativity(bs), abs=1e-9)


def test_antidiagonal_path_rejects_plain_blocks():
    bs = assemble(_cfg(0.5, 0.7, 0.1, 0.6, 0.2, Strategy.pnrd(1, 1)))
    with pytest.raises(UnsupportedStructureError):
        antidiagonal_log_negativity(bs)


@settings(max_examples=10)
@given(configs())
def test_jacobi_matches_lapack(cfg):
    # the rotation solver is pure Python; keep the blocks small
    bs = assemble(Config(min(cfg.lam, 0.3), cfg.arm, cfg.arm_prime, cfg.strategy))
    assert log_negativity(bs, method="jacobi") == pytest.approx(log_negativity(bs), abs=1e-10)


def test_jacobi_eigenvalues_random_matrices():
    rng = np.random.default_rng(3)
    for n in (1, 2, 5, 30):
        a = rng.normal(size=(n, n))
        a = a + a.T
        np.testing.assert_allclose(np.sort(jacobi_eigenvalues(a)), np.linalg.eigvalsh(a),
                                   atol=1e-12 * max(1.0, np.abs(a).max()))


def test_unknown_eigen_method():
    with pytest.raises(ValueError):
        block_trace_norm(np.eye(2), method="qr")


@pytest.mark.parametrize("lam", [0.3, 0.6, 0.8])
def test_truncation_is_cauchy(lam):
    cfg = _cfg(lam, 0.7, 0.1, strategy=Strategy.pnrd(1, 1))
    values = [log_negativity(assemble(cfg, k_max=k)) for k in range(20, 60, 8)]
    steps = np.abs(np.diff(values))
    assert np.all(steps[1:] <= steps[:-1] + 1e-15)


def test_default_cap_warns_when_too_small():
    cfg = _cfg(0.9, 1.0, strategy=Strategy.apd("off", "off"))
    with pytest.warns(PrecisionWarning):
        assert trace_and_norm(assemble(cfg))[0] == pytest.approx(1.0, abs=1e-9)


def test_metrics_uses_config_lambda_by_default():
    bs = assemble(_cfg(0.5, 0.8))
    assert isinstance(bs, BlockSet)
    assert metrics(bs) == metrics(bs, 0.5)
    assert isinstance(metrics(bs), Metrics)
