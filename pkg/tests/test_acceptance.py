"""Acceptance suite.

Each test checks one criterion at its stated tolerance and records a
one-line PASS/FAIL verdict; ``conftest.py`` prints the collected lines at
the end of the pytest run. Running this file directly prints them as each
check finishes.
"""

import time

import numpy as np
import pytest

from cwarmijo.analysis import (
    claim6_dichotomy_check,
    convergence_basin_experiment,
    example_smoothness_model,
    remark_inequality_experiment,
)
from cwarmijo.linesearch import (
    LineSearchParams,
    armijo_holds,
    backtracking_delta,
)
from cwarmijo.objective import (
    SeparableObjective,
    fd_gradient_check,
    make_example_g,
    make_example_g2d,
    make_quadratic,
    make_rosenbrock,
)
from cwarmijo.optimizers import StoppingRule, VerdictKind, run_coordinatewise_gdnew, run_method
from cwarmijo.output import write_outcomes

RESULTS: list[str] = []
LIVE = False


def record(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number} ({name}): {detail}"
    RESULTS.append(line)
    if LIVE:
        print(line, flush=True)


# --- shared corpus --------------------------------------------------------------

P = LineSearchParams(0.5, 0.5, 1.0)
LONG = StoppingRule(max_iterations=10_000, gradient_tolerance=1e-300)
FAMILY = ("backtracking", "two-way")


def _corpus():
    """(label, function, separable split or None); eigenvalues stay inside [0.1, 100]."""
    q = make_quadratic([1.0, 2.0, 3.0])
    ill = make_quadratic([0.1, 1.0, 100.0])
    return [
        ("quadratic", q, SeparableObjective(make_quadratic([1.0]), make_quadratic([2.0, 3.0]))),
        ("ill-conditioned", ill, SeparableObjective(make_quadratic([0.1]), make_quadratic([1.0, 100.0]))),
        ("g", make_example_g(), None),
        ("g+g", make_example_g2d(), make_example_g2d()),
        ("rosenbrock", make_rosenbrock(), None),
    ]


def _corpus_runs():
    rng = np.random.default_rng(2024)
    runs = []
    for label, f, fs in _corpus():
        for method in FAMILY:
            variants = [(method, f)]
            if fs is not None:
                variants.append((f"coordinatewise-{method}", fs))
            for m, fun in variants:
                for _ in range(3):
                    z0 = rng.uniform(-1.5, 1.5, fun.dimension)
                    runs.append((label, m, fun, run_method(m, fun, z0, P, LONG)))
    return runs


@pytest.fixture(scope="module")
def corpus_runs():
    return _corpus_runs()


@pytest.fixture(scope="module")
def basin_report():
    t0 = time.perf_counter()
    rep = convergence_basin_experiment(sample_count=1000, seed=0, spread=0.1, stop=StoppingRule(max_iterations=100_000))
    return rep, time.perf_counter() - t0


# --- criteria -------------------------------------------------------------------


def test_criterion_1_quadratic_ladder_oracle():
    rng = np.random.default_rng(1)
    cases = []
    for _ in range(1000):
        lam = rng.uniform(0.1, 100.0)
        d = int(rng.integers(1, 6))
        params = LineSearchParams(rng.uniform(0.01, 0.99), rng.uniform(0.05, 0.95), 10.0 ** rng.uniform(-2, 2))
        z = rng.normal(size=d) * 10.0 ** rng.uniform(-2, 2)
        cases.append((make_quadratic([lam] * d), lam, params, z))
    t0 = time.perf_counter()
    got = [backtracking_delta(f, z, p).delta for f, _, p, z in cases]
    elapsed = time.perf_counter() - t0
    mismatches = 0
    for (_, lam, p, _), delta in zip(cases, got):
        bound = 2.0 * (1.0 - p.alpha) / lam
        n = 0
        while p.rung(n) > bound:
            n += 1
        mismatches += delta != p.rung(n)
    ok = mismatches == 0 and elapsed < 1.0
    record(1, "quadratic line-search oracle", ok, f"{mismatches} mismatches in 1000 instances, {elapsed:.3f}s")
    assert mismatches == 0
    assert elapsed < 1.0


def test_criterion_2_remark_inequality():
    t0 = time.perf_counter()
    rep = remark_inequality_experiment(10_000, seed=42)
    elapsed = time.perf_counter() - t0
    ok = rep.passed and rep.exhausted == 0 and elapsed < 10.0
    record(
        2,
        "max-inequality of full vs block rates",
        ok,
        f"{len(rep.violations)} violations in {rep.instances} instances, "
        f"full rate > smaller block rate in {rep.exceeds_min_frequency:.2%}, {elapsed:.2f}s",
    )
    assert rep.passed and rep.exhausted == 0
    assert elapsed < 10.0


def test_criterion_3_armijo_certificate_and_descent(corpus_runs):
    cert = mono = steps = 0
    for _, method, f, traj in corpus_runs:
        mono += int(np.sum(np.diff(traj.values) > 0))
        for k in range(traj.iterations):
            steps += 1
            z = traj.points[k]
            d1, d2 = traj.deltas[k]
            if method.startswith("coordinatewise"):
                # each block rate is defined by its own block's inequality
                x, y = f.blocks(z)
                holds = armijo_holds(f.block1, x, d1, P.alpha) and armijo_holds(f.block2, y, d2, P.alpha)
            else:
                holds = armijo_holds(f, z, d1, P.alpha)
            cert += not holds
    ok = cert == 0 and mono == 0
    record(3, "Armijo certificate and monotone descent", ok, f"{steps} steps in {len(corpus_runs)} runs, {cert} certificate and {mono} monotonicity violations")
    assert cert == 0 and mono == 0


def _rung_index(p: LineSearchParams, delta: float) -> int:
    n = 0
    while p.rung(n) > delta:
        n += 1
    assert p.rung(n) == delta, "rate is off the ladder"
    return n


def test_criterion_4_gdnew_caps():
    f = make_example_g2d()
    model = example_smoothness_model(0.5)
    rng = np.random.default_rng(4)
    checked = violations = 0
    while checked < 1000:
        traj = run_coordinatewise_gdnew(f, rng.uniform(-1, 1, 2), P, (model, model), StoppingRule(max_iterations=60))
        for k in range(traj.iterations):
            for block in range(2):
                t = traj.points[k, block]
                gn = abs(f.gradient(traj.points[k])[block])
                if gn == 0.0:
                    continue
                delta = traj.deltas[k, block]
                r, L = model.evaluate([t])
                capped = delta < P.alpha / L and delta * gn < r
                n = _rung_index(P, delta)
                if n == 0:
                    maximal = True
                else:
                    up = P.rung(n - 1)
                    maximal = not (up < P.alpha / L and up * gn < r)
                violations += not (capped and maximal)
                checked += 1
    record(4, "GD-New cap certificate", violations == 0, f"{violations} violations in {checked} block steps")
    assert violations == 0


def test_criterion_5_basin(basin_report):
    rep, elapsed = basin_report
    crit = rep.fraction("CriticalPoint")
    good = rep.class_counts.get("LocalMinimum", 0) + rep.class_counts.get("Origin", 0)
    n_crit = rep.verdict_counts.get("CriticalPoint", 0)
    good_frac = good / n_crit if n_crit else 0.0
    saddles = rep.class_counts.get("GeneralizedSaddle", 0)
    ok = crit >= 0.99 and good_frac >= 0.99 and elapsed < 120
    record(
        5,
        "coordinate-wise GD-New basin",
        ok,
        f"{crit:.1%} CriticalPoint, {good_frac:.1%} of those LocalMinimum/Origin, "
        f"{saddles} saddles, classes {rep.class_counts}, {elapsed:.1f}s",
    )
    assert crit >= 0.99
    assert good_frac >= 0.99
    assert elapsed < 120


def test_criterion_6_dichotomy():
    t0 = time.perf_counter()
    rep = claim6_dichotomy_check(sample_count=1000, seed=0)
    elapsed = time.perf_counter() - t0
    anomalies = rep.extra["anomalies"]
    partition = sum(rep.class_counts.values()) == 1000
    ok = anomalies == 0 and partition and elapsed < 120
    record(6, "full-space GD-New dichotomy", ok, f"cases {rep.class_counts}, {elapsed:.1f}s")
    assert partition and anomalies == 0
    assert elapsed < 120


def test_criterion_7_vanishing_steps(corpus_runs):
    # Runs that stop early (exact critical point, or no representable
    # decrease left) keep their iterate for the rest of the window.
    window = LONG.max_iterations
    worst = 0.0
    counted = full = 0
    for _, _, _, traj in corpus_runs:
        if traj.verdict.kind is VerdictKind.DIVERGED:
            continue
        counted += 1
        full += traj.iterations == window
        steps = np.zeros(window)
        steps[: traj.iterations] = traj.step_norms[: traj.iterations]
        worst = max(worst, float(np.max(steps[-window // 10 :])))
    ok = worst < 1e-6 and counted > 0
    record(7, "vanishing step", ok, f"max late step {worst:.3g} over {counted} runs ({full} used the full budget)")
    assert counted > 0
    assert worst < 1e-6


def test_criterion_8_gradient_check():
    rng = np.random.default_rng(8)
    worst = {}
    failures = 0
    for label, f, _ in _corpus():
        for _ in range(100):
            z = rng.uniform(-1.0, 1.0, f.dimension)
            h, tol = 1e-6, 1e-5
            if label.startswith("g"):
                while np.min(np.abs(z)) < 1e-3:
                    z = rng.uniform(-1.0, 1.0, f.dimension)
                d = float(np.min(np.abs(z)))
                # g oscillates on the scale t^2, so the step follows it
                h = min(1e-6, 1e-3 * d * d)
                if d < 0.05:
                    tol = 1e-3
            err = fd_gradient_check(f, z, h)
            worst[label] = max(worst.get(label, 0.0), err)
            failures += err >= tol
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record(8, "finite-difference gradient check", failures == 0, f"{failures} failures; worst {detail}")
    assert failures == 0


def test_criterion_9_determinism(basin_report, tmp_path):
    first, _ = basin_report
    second = convergence_basin_experiment(
        sample_count=1000, seed=0, spread=0.1, stop=StoppingRule(max_iterations=100_000), workers=1
    )
    a = write_outcomes(first.outcomes, tmp_path / "a.csv").read_bytes()
    b = write_outcomes(second.outcomes, tmp_path / "b.csv").read_bytes()
    record(9, "determinism", a == b, f"{len(a)} bytes, identical={a == b}")
    assert a == b


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    LIVE = True
    runs = _corpus_runs()
    t0 = time.perf_counter()
    basin = (convergence_basin_experiment(sample_count=1000, seed=0, spread=0.1, stop=StoppingRule(max_iterations=100_000)), 0.0)
    basin = (basin[0], time.perf_counter() - t0)
    checks = [
        lambda: test_criterion_1_quadratic_ladder_oracle(),
        lambda: test_criterion_2_remark_inequality(),
        lambda: test_criterion_3_armijo_certificate_and_descent(runs),
        lambda: test_criterion_4_gdnew_caps(),
        lambda: test_criterion_5_basin(basin),
        lambda: test_criterion_6_dichotomy(),
        lambda: test_criterion_7_vanishing_steps(runs),
        lambda: test_criterion_8_gradient_check(),
        lambda: test_criterion_9_determinism(basin, Path(tempfile.mkdtemp())),
    ]
    failed = 0
    for check in checks:
        try:
            check()
        except AssertionError:
            failed += 1
    raise SystemExit(1 if failed else 0)
