import csv
import io
import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate, stats

from rfthz.analysis import (
    association_prob_thz, conditional_distance_pdf_rf_exact, conditional_distance_pdf_thz,
)
from rfthz.coverage import coverage_total
from rfthz.montecarlo import (
    OUTCOME_COLUMNS, RF, THZ, Estimate, SimConfig, run_trials, sample_ppp,
    simulate_association, simulate_handoff,
)
from rfthz.model import Scenario


def _cdf_from_pdf(pdf, upper, n=20001):
    r = np.linspace(0.0, upper, n)
    vals = pdf(np.maximum(r, 1e-12))
    cdf = sp_integrate.cumulative_trapezoid(vals, r, initial=0.0)
    return lambda x: np.interp(x, r, cdf / cdf[-1])


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(trials=0)
    with pytest.raises(ValueError):
        SimConfig(guard_factor=0.5)
    with pytest.raises(ValueError):
        SimConfig(threads=0)
    assert SimConfig(window_radius=100.0, guard_factor=3.0).drop_radius == 300.0


def test_estimate_interval():
    e = Estimate(0.5, 500, 1000)
    lo, hi = e.interval()
    assert lo < 0.5 < hi
    assert e.stderr == pytest.approx(math.sqrt(0.25 / 1000))
    assert Estimate(math.nan, 0, 0).interval() == (0.0, 1.0)
    assert Estimate(0.0, 0, 100).interval()[0] == 0.0


def test_sample_ppp_counts():
    rng = np.random.default_rng(3)
    assert sample_ppp(0.0, 100.0, rng).shape == (0, 2)
    with pytest.raises(ValueError):
        sample_ppp(-1.0, 10.0, rng)
    lam, radius, reps = 1e-3, 100.0, 400
    counts = [len(sample_ppp(lam, radius, rng)) for _ in range(reps)]
    mean = lam * math.pi * radius ** 2
    assert abs(np.mean(counts) - mean) <= 3 * math.sqrt(mean / reps)


def test_sample_ppp_is_spatially_uniform():
    # Ripley's K at small scales for a disc, ignoring the edge: K(t) ~ pi t^2
    rng = np.random.default_rng(5)
    lam = 2e-2
    pts = sample_ppp(lam, 200.0, rng)
    inner = pts[np.hypot(pts[:, 0], pts[:, 1]) < 150.0]
    t = 10.0
    d = np.hypot(inner[:, None, 0] - pts[None, :, 0], inner[:, None, 1] - pts[None, :, 1])
    pairs = np.sum((d > 0) & (d < t)) / len(inner)
    assert pairs / lam == pytest.approx(math.pi * t * t, rel=0.08)
    r = np.hypot(pts[:, 0], pts[:, 1])
    assert stats.kstest((r / 200.0) ** 2, "uniform").pvalue > 1e-3


def test_seeded_runs_are_reproducible_across_threads():
    s = Scenario().with_params(velocity=30.0)
    a = run_trials(s, SimConfig(trials=3000, seed=9, block_size=500), coverage=True,
                   with_mobility=True)
    b = run_trials(s, SimConfig(trials=3000, seed=9, block_size=500, threads=4),
                   coverage=True, with_mobility=True)
    assert a.to_csv() == b.to_csv()
    c = run_trials(s, SimConfig(trials=3000, seed=10, block_size=500), coverage=True)
    assert not np.array_equal(a.serving_distance, c.serving_distance)


def test_static_user_never_hands_off():
    res = run_trials(Scenario().with_params(velocity=0.0), SimConfig(trials=2000, seed=1))
    assert not res.ho.any()


def test_huge_hysteresis_suppresses_handoff():
    s = Scenario().with_params(velocity=30.0, hysteresis=1e6)
    _, _, overall = simulate_handoff(s, SimConfig(trials=5000, seed=2))
    assert overall.value < 2e-3


def test_thz_only_network_always_associates_thz():
    s = Scenario().with_params(lambda_R=0.0)
    assert simulate_association(s, SimConfig(trials=2000, seed=4)).value == 1.0


def test_association_matches_analysis():
    s = Scenario().with_params(ka=0.05)
    est = simulate_association(s, SimConfig(trials=20_000, seed=6))
    assert association_prob_thz(s) == pytest.approx(est.value, abs=4 * est.stderr + 1e-3)


def test_coverage_without_absorption_matches_analysis():
    s = Scenario().with_params(ka=0.0, rate_threshold=0.5e9)
    res = run_trials(s, SimConfig(trials=40_000, seed=8), coverage=True)
    analytic = coverage_total(s)
    c, c_t, c_r = res.static_coverage()
    assert c.value == pytest.approx(analytic.c, abs=0.02)
    assert c_t.value == pytest.approx(analytic.c_t, abs=0.02)


@pytest.mark.parametrize("ka", [0.01, 0.05])
def test_serving_distance_laws(ka):
    s = Scenario().with_params(ka=ka)
    res = run_trials(s, SimConfig(trials=50_000, seed=12))
    thz = res.serving_distance[res.tier == THZ]
    rf = res.serving_distance[res.tier == RF]
    cdf_t = _cdf_from_pdf(lambda r: conditional_distance_pdf_thz(s, r), 400.0)
    cdf_r = _cdf_from_pdf(lambda r: conditional_distance_pdf_rf_exact(s, r), 1000.0)
    assert stats.kstest(thz, cdf_t).statistic <= 0.02
    # only a few thousand RF-associated trials: judge by the p-value instead
    assert stats.kstest(rf, cdf_r).pvalue > 1e-3


def test_guard_factor_leaves_estimates_unchanged():
    s = Scenario().with_params(ka=0.05, velocity=30.0)
    base = run_trials(s, SimConfig(trials=20_000, seed=21, guard_factor=2.0))
    wide = run_trials(s, SimConfig(trials=20_000, seed=22, guard_factor=4.0))
    # independent runs: the difference has sqrt(2) times the single-run error
    for a, b in [(base.association(), wide.association()),
                 (base.handoff()[2], wide.handoff()[2])]:
        assert abs(a.value - b.value) <= 3 * math.sqrt(2) * max(a.stderr, b.stderr)


def test_mobility_kill_rate():
    s = Scenario().with_params(velocity=30.0, eta=0.5, rate_threshold=0.25e9)
    res = run_trials(s, SimConfig(trials=30_000, seed=14), coverage=True, with_mobility=True)
    c_static = res.static_coverage()[0].value
    p_h = res.handoff()[2].value
    assert res.coverage()[0].value == pytest.approx(c_static * (1 - 0.5 * p_h), abs=0.01)
    assert np.all(res.covered_mobile <= res.covered)


def test_csv_and_outcomes():
    res = run_trials(Scenario(), SimConfig(trials=50, seed=0), coverage=True)
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert tuple(rows[0]) == OUTCOME_COLUMNS
    assert len(rows) == 51
    assert {r[1] for r in rows[1:]} <= {"RF", "THZ"}
    outs = list(res.outcomes())
    assert len(outs) == 50 and outs[7].trial == 7
