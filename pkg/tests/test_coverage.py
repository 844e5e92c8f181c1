import math

import numpy as np
import pytest

from rfthz.coverage import (
    DEFAULT_COVERAGE, BlockageModel, CoverageConfig, MisalignmentModel, _inversion,
    _misaligned_conditional, _pgfl_lt_absorbing,
    _series_lt_dimless, coverage_rf, coverage_thz, coverage_thz_conditional,
    coverage_thz_noise_limited, coverage_thz_with_blockage, coverage_thz_with_misalignment,
    coverage_total, coverage_with_mobility, lt_aggregate_thz_interference,
    series_validity_limit, thz_margin_dimless,
)
from rfthz.handoff import HandoffResult
from rfthz.model import Scenario, rate_to_sinr_threshold
from rfthz.montecarlo import SimConfig, simulate_coverage
from rfthz.numerics import DomainError

INTEGER = CoverageConfig(lt_index_mode="integer")
NOISE_OFF = CoverageConfig(absorption_noise=False)


def test_config_indices_and_validation():
    assert DEFAULT_COVERAGE.indices() == pytest.approx((1.01, 2.01, 3.01))
    assert INTEGER.indices() == (2, 3)
    with pytest.raises(ValueError):
        CoverageConfig(lt_series_terms=0)
    with pytest.raises(ValueError):
        CoverageConfig(lt_epsilon=1.0)
    with pytest.raises(ValueError):
        CoverageConfig(lt_index_mode="half")


def test_series_validity_limit():
    assert series_validity_limit(DEFAULT_COVERAGE) == pytest.approx(255.6, rel=0.01)
    assert series_validity_limit(INTEGER) == math.inf


def test_transform_at_zero_and_without_interferers():
    s = Scenario()
    assert lt_aggregate_thz_interference(s, DEFAULT_COVERAGE, 0.0, 10.0) == 1.0
    empty = Scenario().with_params(lambda_T=0.0)
    assert lt_aggregate_thz_interference(empty, DEFAULT_COVERAGE, 2.5, 10.0) == 1.0


@pytest.mark.parametrize("cfg", [DEFAULT_COVERAGE, INTEGER])
@pytest.mark.parametrize("r0", [2.0, 10.0, 60.0])
def test_series_transform_bounded_on_imaginary_axis(cfg, r0):
    y = np.concatenate([[0.0], np.geomspace(1e-4, 1e6, 400)])
    lt = _series_lt_dimless(Scenario().with_params(lambda_T=1e-3), cfg, r0, y)
    assert lt[0] == pytest.approx(1.0)
    assert np.all(np.abs(lt) <= 1.0 + 1e-12)


def test_pgfl_transform_bounded_on_imaginary_axis():
    s = Scenario().with_params(ka=0.05, lambda_T=1e-3)
    y = np.concatenate([[0.0], np.geomspace(1e-4, 1e6, 200)])
    lt = _pgfl_lt_absorbing(s, 10.0, y)
    assert lt[0] == pytest.approx(1.0)
    assert np.all(np.abs(lt) <= 1.0 + 1e-12)


def test_zero_threshold_is_covered():
    s = Scenario()
    assert coverage_thz_conditional(s, DEFAULT_COVERAGE, 0.0, 20.0) == 1.0
    assert coverage_thz(s, DEFAULT_COVERAGE, 0.0) == 1.0
    assert coverage_rf(s, DEFAULT_COVERAGE, 0.0) == 1.0


def test_deterministic_margin_without_interference():
    s = Scenario().with_params(lambda_T=0.0, ka=0.05)
    # margin (1 + tau) e^{-K r} - tau changes sign at ln(4/3)/K ~ 5.75 m for tau = 3
    assert thz_margin_dimless(s, DEFAULT_COVERAGE, 3.0, 5.0) > 0
    assert coverage_thz_conditional(s, DEFAULT_COVERAGE, 3.0, 5.0) == pytest.approx(1.0,
                                                                                   abs=1e-6)
    assert coverage_thz_conditional(s, DEFAULT_COVERAGE, 3.0, 6.5) == pytest.approx(0.0,
                                                                                   abs=1e-6)


@pytest.mark.parametrize("ka, rate", [(0.05, 1e9), (0.01, 1e9), (0.01, 2e9), (0.0, 4e9)])
@pytest.mark.parametrize("standalone", [True, False])
def test_noise_limited_inversion_matches_margin_root(ka, rate, standalone):
    s = Scenario().with_params(ka=ka, rate_threshold=rate)
    a = coverage_thz_noise_limited(s, standalone=standalone, method="inversion")
    b = coverage_thz_noise_limited(s, standalone=standalone, method="root")
    assert a == pytest.approx(b, abs=1e-5)


def test_noise_limited_unknown_method():
    with pytest.raises(ValueError):
        coverage_thz_noise_limited(Scenario(), method="series")


def test_thz_coverage_decreases_with_rate():
    s = Scenario().with_params(ka=0.01)
    values = [coverage_thz(s.with_params(rate_threshold=r)) for r in (0.25e9, 0.5e9, 1e9, 2e9)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_absorption_noise_hurts():
    s = Scenario().with_params(ka=0.05)
    on = coverage_thz(s, DEFAULT_COVERAGE)
    off = coverage_thz(s, NOISE_OFF)
    assert on < off


@pytest.mark.parametrize("rate", [40e6, 100e6, 200e6])
def test_rf_single_tier_closed_form(rate):
    s = Scenario().with_params(lambda_T=0.0, rate_threshold=rate)
    tau = rate_to_sinr_threshold(rate, s.rf.bandwidth)
    expected = 1.0 / (1.0 + math.sqrt(tau) * math.atan(math.sqrt(tau)))
    assert coverage_rf(s, DEFAULT_COVERAGE, tau, mu=0.0) == pytest.approx(expected, abs=1e-6)


def test_rf_thermal_noise_lowers_coverage():
    s = Scenario().with_params(rate_threshold=100e6)
    with_noise = CoverageConfig(interference_limited_rf=False)
    assert coverage_rf(s, with_noise) < coverage_rf(s, DEFAULT_COVERAGE)


def test_totals_collapse_to_single_tier():
    thz_only = Scenario().with_params(lambda_R=0.0, rate_threshold=0.5e9, ka=0.01)
    res = coverage_total(thz_only)
    assert res.a_t == 1.0 and res.c == pytest.approx(res.c_t)
    rf_only = Scenario().with_params(lambda_T=0.0, rate_threshold=100e6)
    res = coverage_total(rf_only)
    assert res.a_t == 0.0 and res.c == pytest.approx(res.c_r)


def test_total_between_tiers():
    res = coverage_total(Scenario().with_params(ka=0.03, rate_threshold=0.25e9))
    assert min(res.c_t, res.c_r) <= res.c <= max(res.c_t, res.c_r)


def test_mobility_cost_limits():
    s = Scenario().with_params(rate_threshold=0.5e9, ka=0.01)
    cov = coverage_total(s)
    assert coverage_with_mobility(s.with_params(eta=0.0), coverage=cov) == cov.c
    assert coverage_with_mobility(s.with_params(velocity=0.0), coverage=cov) == pytest.approx(
        cov.c)
    certain = HandoffResult(1.0, 1.0, 1.0, cov.a_t, 0.0)
    assert coverage_with_mobility(s.with_params(eta=1.0), coverage=cov,
                                  handoff=certain) == 0.0


def test_mobility_coverage_falls_with_speed():
    base = Scenario().with_params(rate_threshold=0.5e9, ka=0.01)
    cov = coverage_total(base)
    values = [coverage_with_mobility(base.with_params(velocity=v), coverage=cov)
              for v in (0.0, 10.0, 30.0, 56.0)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_identity_misalignment():
    s = Scenario().with_params(ka=0.01, lambda_T=1e-3)
    tau = 1.0
    mis = MisalignmentModel.point_mass(1.0)
    for r0 in (5.0, 20.0):
        assert _inversion(s, DEFAULT_COVERAGE, tau, r0, mis.lt) == pytest.approx(
            coverage_thz_conditional(s, DEFAULT_COVERAGE, tau, r0), abs=1e-6)


def test_total_misalignment_kills_coverage():
    s = Scenario().with_params(ka=0.01, rate_threshold=0.5e9)
    mis = MisalignmentModel.point_mass(0.0)
    assert coverage_thz_with_misalignment(s, DEFAULT_COVERAGE, None, mis) == pytest.approx(
        0.0, abs=1e-6)


def test_atom_mixture_matches_transform_inversion():
    s = Scenario().with_params(ka=0.01, lambda_T=1e-3)
    mis = MisalignmentModel.discrete([0.5, 1.5], [1.0, 3.0])
    for r0 in (5.0, 20.0, 40.0):
        assert _misaligned_conditional(s, DEFAULT_COVERAGE, 1.0, r0, mis) == pytest.approx(
            _inversion(s, DEFAULT_COVERAGE, 1.0, r0, mis.lt), abs=1e-6)


def test_coverage_grows_with_alignment_factor():
    s = Scenario().with_params(ka=0.01, rate_threshold=0.5e9)
    values = [coverage_thz_with_misalignment(s, DEFAULT_COVERAGE, None,
                                             MisalignmentModel.point_mass(c))
              for c in (0.4, 0.7, 1.0)]
    assert values[0] < values[1] < values[2]
    assert values[2] == pytest.approx(coverage_thz(s, DEFAULT_COVERAGE), abs=1e-9)


def test_two_point_misalignment_against_simulation():
    s = Scenario().with_params(ka=0.05, rate_threshold=0.25e9, velocity=0.0)
    mis = MisalignmentModel.discrete([0.5, 1.5], [1.0, 1.0])
    analytic = coverage_thz_with_misalignment(s, DEFAULT_COVERAGE, None, mis)
    _, c_t, _ = simulate_coverage(s, SimConfig(trials=40_000, seed=11), misalignment=mis)
    assert analytic == pytest.approx(c_t.value, abs=0.02)


def test_blockage_model():
    b = BlockageModel(blocker_intensity=1e-3, mean_length=10.0, mean_width=4.0)
    assert b.xi == pytest.approx(2e-3 * 14 / math.pi)
    assert b.p == pytest.approx(0.04)
    r = np.array([0.0, 25.0])
    assert b.los_probability(r) == pytest.approx(np.exp(-(b.xi * r + b.p)))
    with pytest.raises(DomainError):
        BlockageModel(blocker_intensity=0.1, mean_length=10.0, mean_width=1.0)
    with pytest.raises(ValueError):
        BlockageModel(blocker_intensity=-1.0)


def test_blockage_reduces_coverage_monotonically():
    s = Scenario().with_params(ka=0.01, rate_threshold=0.5e9)
    tau = rate_to_sinr_threshold(s.rate_threshold, s.thz.bandwidth)
    clear = coverage_thz(s, DEFAULT_COVERAGE, tau)
    values = [coverage_thz_with_blockage(s, DEFAULT_COVERAGE, tau,
                                         BlockageModel(lam, 5.0, 5.0))
              for lam in (0.0, 1e-4, 1e-3, 1e-2)]
    assert values[0] == pytest.approx(clear, abs=1e-9)
    assert all(a > b for a, b in zip(values, values[1:]))


def test_blockage_factor_at_zero_threshold():
    # with tau = 0 the conditional coverage is p_LOS itself
    s = Scenario().with_params(ka=0.01)
    b = BlockageModel(1e-3, 5.0, 5.0)
    value = coverage_thz_with_blockage(s, DEFAULT_COVERAGE, 0.0, b, standalone=True)
    lam = s.thz.intensity
    from rfthz.numerics import integrate
    expected = integrate(lambda r: 2 * math.pi * lam * r * np.exp(-math.pi * lam * r * r)
                         * b.los_probability(r), 0.0, 500.0)
    assert value == pytest.approx(expected, rel=1e-6)
