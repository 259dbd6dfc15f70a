import math

import numpy as np
import pytest

from cwarmijo.analysis import (
    CriticalClass,
    classify_critical_point,
    classify_example_limit,
    claim6_dichotomy_check,
    convergence_basin_experiment,
    example_smoothness_model,
    example_smoothness_model_2d,
    find_critical_points_1d,
    gdnew_delta_on_grid,
    line_search_property_suite,
    perturb_params,
    remark_deltas,
    remark_inequality_experiment,
)
from cwarmijo.linesearch import LineSearchParams, armijo_holds
from cwarmijo.objective import (
    DifferentiableFunction,
    SeparableObjective,
    g_second_derivative,
    make_example_g,
    make_example_g2d,
    make_quadratic,
)
from cwarmijo.optimizers import StoppingRule, VerdictKind

G = make_example_g()
G2 = make_example_g2d()
P1 = LineSearchParams(0.5, 0.5, 1.0)


def _catalog(window=(0.05, 1.0)):
    return find_critical_points_1d(G, window, grid=10_000)


# --- smoothness model ---------------------------------------------------------


def test_smoothness_model_example():
    m = example_smoothness_model(0.5)
    r, L = m.evaluate([1.0])
    assert r == 0.5
    assert L == pytest.approx(max(9.0, 13 + 2 / 3), rel=1e-15)


def test_smoothness_model_dominates_second_derivative():
    rng = np.random.default_rng(3)
    m = example_smoothness_model(0.5)
    for t in rng.uniform(-2, 2, 100):
        r, L = m.evaluate([t])
        assert 0 < r < abs(t)
        for s in rng.uniform(t - r, t + r, 100):
            assert abs(g_second_derivative(s)) <= L


def test_smoothness_model_undefined_at_zero_and_floor():
    r, L = example_smoothness_model(0.5).evaluate([0.0])
    assert math.isnan(r) and math.isnan(L)
    _, L = example_smoothness_model(0.5, L0=1e3).evaluate([1.0])
    assert L == 1e3
    with pytest.raises(ValueError):
        example_smoothness_model(1.0)


def test_smoothness_model_2d_uses_nearest_axis():
    r, L = example_smoothness_model_2d(0.5).evaluate([1.0, -0.2])
    assert r == pytest.approx(0.1)
    _, L1 = example_smoothness_model(0.5).evaluate([0.2])
    assert L == L1


def test_gdnew_rate_bounded_below_on_compact_sets():
    grid = np.concatenate([np.linspace(-2, -0.05, 2000), np.linspace(0.05, 2, 2000)])
    deltas = gdnew_delta_on_grid(grid, P1, example_smoothness_model(0.5))
    assert deltas.min() > 0
    assert np.all(deltas <= P1.delta0)


# --- critical-point catalog ---------------------------------------------------


def test_catalog_single_minimum_of_shifted_quadratic():
    f = DifferentiableFunction(1, lambda z: 0.5 * (z[0] - 3) ** 2, lambda z: np.array([z[0] - 3]))
    cat = find_critical_points_1d(f, (0.0, 10.0), grid=1001)
    assert len(cat) == 1
    assert cat[0].location == pytest.approx(3.0, abs=1e-12)
    assert cat[0].kind is CriticalClass.LOCAL_MINIMUM


def test_catalog_of_g_alternates():
    cat = _catalog()
    assert len(cat) >= 4
    locs = [c.location for c in cat]
    assert locs == sorted(locs) and len(set(locs)) == len(locs)
    kinds = [c.kind for c in cat]
    assert set(kinds) <= {CriticalClass.LOCAL_MINIMUM, CriticalClass.GENERALIZED_SADDLE}
    for a, b in zip(kinds, kinds[1:]):
        assert a is not b
    for c in cat:
        assert abs(G.gradient([c.location])[0]) < 1e-9
        assert np.sign(c.second_derivative) == np.sign(g_second_derivative(c.location))


def test_catalog_is_mirror_symmetric():
    right = _catalog((0.05, 1.0))
    left = _catalog((-1.0, -0.05))
    assert len(left) == len(right)
    np.testing.assert_allclose(
        np.array([c.location for c in left]) + np.array([c.location for c in reversed(right)]), 0.0, atol=1e-9
    )
    # g is even, so a minimum at t is a minimum at -t as well
    assert [c.kind for c in left] == [c.kind for c in reversed(right)]


def test_catalog_rejects_bad_windows():
    with pytest.raises(ValueError):
        find_critical_points_1d(G, (1.0, 0.0))
    with pytest.raises(ValueError):
        find_critical_points_1d(G, (0.1, 1.0), grid=1)
    with pytest.raises(ValueError):
        find_critical_points_1d(G2, (0.1, 1.0))


# --- classification -----------------------------------------------------------


def test_classify_quadratics():
    bowl = classify_critical_point(make_quadratic([1.0, 1.0]), [0.0, 0.0])
    assert bowl.kind is CriticalClass.LOCAL_MINIMUM
    assert bowl.eigen_signs == ("positive", "positive")
    saddle = classify_critical_point(make_quadratic([1.0, -1.0]), [0.0, 0.0])
    assert saddle.kind is CriticalClass.GENERALIZED_SADDLE
    assert sorted(saddle.eigen_signs) == ["negative", "positive"]
    flat = classify_critical_point(make_quadratic([1.0, 0.0]), [0.0, 0.0])
    assert flat.kind is CriticalClass.DEGENERATE


def test_classify_example_at_block_minima_and_saddles():
    cat = _catalog()
    tmin = next(c.location for c in cat if c.kind is CriticalClass.LOCAL_MINIMUM)
    tmax = next(c.location for c in cat if c.kind is CriticalClass.GENERALIZED_SADDLE)
    c = classify_example_limit(G2, [tmin, -tmin])
    assert c.kind is CriticalClass.LOCAL_MINIMUM
    np.testing.assert_allclose(sorted(c.eigenvalues), [g_second_derivative(tmin)] * 2, rtol=1e-4)
    assert classify_example_limit(G2, [tmin, tmax]).kind is CriticalClass.GENERALIZED_SADDLE


def test_classify_example_origin_and_near_axis():
    assert classify_example_limit(G2, [1e-6, -2e-5]).kind is CriticalClass.ORIGIN
    c = classify_example_limit(G2, [0.5, 1e-7])
    assert c.kind is CriticalClass.DEGENERATE and c.near_singular
    c = classify_critical_point(G2, [0.5, 1e-4], h=1e-4)
    assert c.near_singular


# --- parameter perturbation ---------------------------------------------------


def test_perturb_params_stays_in_band():
    rng = np.random.default_rng(0)
    base = LineSearchParams(0.5, 0.5, 1.0)
    for _ in range(200):
        p = perturb_params(base, rng)
        assert abs(p.alpha / 0.5 - 1) <= 0.1
        assert abs(p.beta / 0.5 - 1) <= 0.1
        assert abs(p.delta0 - 1) <= 0.1
    assert perturb_params(base, rng, 0.0) == base


# --- full-space rate vs block rates -----------------------------------------


def test_full_rate_never_exceeds_larger_block_rate():
    rep = remark_inequality_experiment(10_000, seed=42)
    assert rep.passed
    assert rep.exhausted == 0
    assert 0 < rep.exceeds_min_frequency < 1


def test_symmetric_blocks_give_equal_rates():
    f = SeparableObjective(G, G)
    full, d1, d2 = remark_deltas(f, [0.6, 0.6], P1)
    assert full.delta == d1.delta == d2.delta


def test_full_rate_can_exceed_smaller_block_rate():
    f = SeparableObjective(make_quadratic([1.0]), make_quadratic([100.0]))
    p = LineSearchParams(0.5, 0.5, 2.0)
    full, d1, d2 = remark_deltas(f, [1.0, 0.01], p)
    assert (d1.delta, d2.delta) == (1.0, 1 / 128)
    assert full.delta == 1 / 64
    assert armijo_holds(f, [1.0, 0.01], 1 / 64, 0.5)
    assert not armijo_holds(f, [1.0, 0.01], 1 / 32, 0.5)


def test_rate_experiment_rejects_empty_run():
    with pytest.raises(ValueError):
        remark_inequality_experiment(0)


def test_line_search_property_suite_is_clean():
    fails = line_search_property_suite(300, seed=5)
    assert set(fails) >= {"membership", "maximality", "two_way_consistency", "gdnew_caps", "coordinatewise_armijo"}
    assert all(v == 0 for v in fails.values())


# --- basin and dichotomy experiments -------------------------------------------


def test_basin_from_double_saddle_stays_put():
    cat = _catalog()
    tmax = next(c.location for c in cat if c.kind is CriticalClass.GENERALIZED_SADDLE)
    rep = convergence_basin_experiment(initial_points=[(tmax, tmax)], spread=0.0, workers=1)
    (o,) = rep.outcomes
    assert o.verdict == "CriticalPoint" and o.iterations == 0
    assert o.classification == "GeneralizedSaddle"


def test_basin_small_sample_reaches_minima():
    rep = convergence_basin_experiment(sample_count=40, seed=7, workers=1)
    assert rep.verdict_counts.get("CriticalPoint", 0) == 40
    assert rep.class_counts.get("GeneralizedSaddle", 0) == 0
    for o in rep.outcomes:
        for t in o.final_point:
            assert abs(G.gradient([t])[0]) < 1e-6


def test_basin_standard_gd_with_huge_rate_fails_to_converge():
    rep = convergence_basin_experiment(
        method="standard",
        sample_count=20,
        spread=0.0,
        base_params=LineSearchParams(0.5, 0.5, 10.0),
        stop=StoppingRule(max_iterations=2000),
        workers=1,
    )
    bad = rep.verdict_counts.get("DivergedToInfinity", 0) + rep.verdict_counts.get("MaxIterations", 0)
    assert bad > 0


def test_basin_is_reproducible_across_worker_counts():
    a = convergence_basin_experiment(sample_count=12, seed=3, workers=1)
    b = convergence_basin_experiment(sample_count=12, seed=3, workers=2)
    assert a.outcomes == b.outcomes


def test_claim6_symmetric_start_is_case1():
    rep = claim6_dichotomy_check(initial_points=[(0.5, 0.5)], workers=1)
    assert rep.outcomes[0].case == "case1"
    x, y = rep.outcomes[0].final_point
    assert x == y


def test_claim6_partition_identity():
    rep = claim6_dichotomy_check(sample_count=30, seed=11, workers=1)
    assert sum(rep.class_counts.values()) == 30
    assert rep.class_counts["anomaly"] == rep.extra["anomalies"] == 0


def test_claim6_critical_block_keeps_coordinate():
    cat = _catalog()
    tmin = next(c.location for c in cat if c.kind is CriticalClass.LOCAL_MINIMUM)
    rep = claim6_dichotomy_check(initial_points=[(tmin, 0.7)], workers=1)
    o = rep.outcomes[0]
    assert o.verdict == VerdictKind.CRITICAL_POINT.value
    assert o.final_point[0] == pytest.approx(tmin, abs=1e-9)
    assert o.case == "case1"
