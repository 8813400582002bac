import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from subtract_sim.errors import ConfigError, DomainError
from subtract_sim.model import (ArmTransmissivities, Config, DetectionRange, ModeParams, Strategy,
                                TruncationPolicy, build_arm_unitary, check_squeezing,
                                mode_coefficients)

intensity = st.floats(0.0, 1.0)


def _fractions(arm):
    mp = mode_coefficients(arm)
    return mp.alpha2, mp.beta2, mp.gamma2


@pytest.mark.parametrize("t_sq, expected", [
    ((1, 1, 1, 1), (1.0, 0.0, 0.0)),
    ((1, 0.8, 1, 1), (0.8, 0.2, 0.0)),
    ((0.9, 0.8, 0.7, 0.6), (0.432, 0.126, 0.442)),
])
def test_mode_coefficients_examples(t_sq, expected):
    got = _fractions(ArmTransmissivities.from_intensities(*t_sq))
    np.testing.assert_allclose(got, expected, atol=1e-12)


@pytest.mark.parametrize("bad", [-0.1, 1.2, math.nan])
def test_transmissivity_domain(bad):
    with pytest.raises(DomainError):
        ArmTransmissivities.from_intensities(bad, 1, 1, 1)
    with pytest.raises(DomainError):
        ArmTransmissivities(1, bad, 1, 1)


def test_random_arms_normalised_and_orthogonal():
    rng = np.random.default_rng(7)
    worst_sum = worst_orth = 0.0
    for t_sq in rng.uniform(0, 1, size=(10_000, 4)):
        arm = ArmTransmissivities.from_intensities(*t_sq)
        mp = mode_coefficients(arm)
        worst_sum = max(worst_sum, abs(mp.alpha2 + mp.beta2 + mp.gamma2 - 1))
        u = build_arm_unitary(arm)
        worst_orth = max(worst_orth, np.abs(u.T @ u - np.eye(5)).max())
    assert worst_sum <= 1e-12
    assert worst_orth <= 1e-12


@given(intensity, intensity, intensity, intensity)
def test_unitary_first_column_regroups(t1, t2, t3, t4):
    arm = ArmTransmissivities.from_intensities(t1, t2, t3, t4)
    col = build_arm_unitary(arm)[:, 0] ** 2
    mp = mode_coefficients(arm)
    assert col[0] == pytest.approx(mp.alpha2, abs=1e-12)
    assert col[2] == pytest.approx(mp.beta2, abs=1e-12)
    assert col[1] + col[3] + col[4] == pytest.approx(mp.gamma2, abs=1e-12)


def test_unitary_examples():
    u = build_arm_unitary(ArmTransmissivities())
    assert u[0, 0] == 1.0 and np.allclose(u.T @ u, np.eye(5))
    col = build_arm_unitary(ArmTransmissivities.from_intensities(1, 0.8, 1, 1))[:, 0] ** 2
    np.testing.assert_allclose(col, [0.8, 0, 0.2, 0, 0], atol=1e-15)


@given(intensity, intensity, intensity, intensity)
def test_lossless_condition(t1, t2, t3, t4):
    arm = ArmTransmissivities.from_intensities(t1, t2, t3, t4)
    # no loss iff nothing reflects before subtraction, the detector is perfect
    # or never reached, and nothing reflects after the tap
    lossless = t1 == 1 and (t3 == 1 or t2 == 1) and (t4 == 1 or t2 == 0)
    assert (mode_coefficients(arm).gamma2 == 0.0) == lossless


def test_mode_params_validation():
    mp = ModeParams.from_fractions(0.7, 0.1)
    assert mp.beta2 == pytest.approx(0.2)
    assert mp.alpha == pytest.approx(math.sqrt(0.7))
    assert not mp.lossless
    with pytest.raises(DomainError):
        ModeParams(0.5, 0.5, 0.5)
    with pytest.raises(DomainError):
        ModeParams.from_fractions(0.9, 0.3)
    # rounding-level undershoot is clipped, not rejected
    assert ModeParams.from_fractions(0.7, 0.3).beta2 == 0.0


@pytest.mark.parametrize("lam", [-0.1, 1.0, 1.5, math.nan])
def test_squeezing_domain(lam):
    with pytest.raises(DomainError):
        check_squeezing(lam)


def test_strategy_parse_and_ranges():
    assert Strategy.parse("pnrd_1_0") == Strategy.pnrd(1, 0)
    assert Strategy.parse("(2, 1)") == Strategy.pnrd(2, 1)
    assert Strategy.parse("apd_on_off") == Strategy.apd("on", "off")
    assert Strategy.parse("On,Off").label == "apd_on_off"
    assert Strategy.pnrd(1, 2).ranges() == (DetectionRange(1, 1), DetectionRange(2, 2))
    on, off = Strategy.apd("on", "off").ranges()
    assert on == DetectionRange(1, None) and on.open and 7 in on
    assert off == DetectionRange(0, 0)
    assert Strategy.apd("on", "off", threshold=3).ranges()[1] == DetectionRange(0, 2)
    assert Strategy.pnrd(1, 0).detects_nothing(1) and not Strategy.pnrd(1, 0).detects_nothing(0)
    assert Strategy.pnrd(1, 0).swapped() == Strategy.pnrd(0, 1)
    assert Strategy.apd("on", "on").symmetric and not Strategy.pnrd(1, 0).symmetric


@pytest.mark.parametrize("label", ["pnrd_1", "xyz", "apd_on_maybe", "1,2,3"])
def test_strategy_parse_errors(label):
    with pytest.raises(ConfigError):
        Strategy.parse(label)


def test_strategy_validation():
    with pytest.raises(ConfigError):
        Strategy.pnrd(-1, 0)
    with pytest.raises(ConfigError):
        Strategy("laser")
    with pytest.raises(ConfigError):
        Strategy.apd("on", "off", threshold=0)


def test_truncation_policy_validation():
    TruncationPolicy(k_max=1, l_max_rel_tol=1e-6, n_max=2)
    for kw in ({"k_max": 0}, {"l_max_rel_tol": 1e-3}, {"l_max_rel_tol": 0.0}, {"n_max": 1}):
        with pytest.raises(ConfigError):
            TruncationPolicy(**kw)


def test_config_counts_bounded_by_truncation():
    with pytest.raises(ConfigError):
        Config.from_fractions(0.5, 0.8, strategy=Strategy.pnrd(11, 0))
    Config.from_fractions(0.5, 0.8, strategy=Strategy.pnrd(11, 0),
                          truncation=TruncationPolicy(n_max=12))


def test_config_helpers():
    cfg = Config.from_fractions(0.5, 0.8, 0.1, 0.6, 0.0, strategy=Strategy.pnrd(1, 0))
    sw = cfg.swapped()
    assert sw.arm == cfg.arm_prime and sw.strategy == Strategy.pnrd(0, 1)
    assert not cfg.lossless and not cfg.degenerate_arms
    assert Config.from_fractions(0.5, 0.8).degenerate_arms
    with pytest.raises(DomainError):
        Config.from_fractions(1.0, 0.8)
