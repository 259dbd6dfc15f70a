"""Critical-point oracles, smoothness models for the example ``g`` and the
Monte-Carlo experiments built on top of the optimizers.

Experiments fan trajectories out over a process pool. Each trajectory draws
from its own generator seeded by ``(seed, index)``, so results do not depend
on the worker count or scheduling order.
"""

from __future__ import annotations

import enum
import math
import os
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import bisect

from .linesearch import (
    LineSearchParams,
    SmoothnessModel,
    armijo_holds,
    backtracking_delta,
    coordinatewise_armijo_holds,
    coordinatewise_deltas,
    gdnew_delta,
    two_way_backtracking_delta,
)
from .objective import (
    Array,
    DifferentiableFunction,
    SeparableObjective,
    as_array,
    build_objective,
    g_second_derivative_bound,
    make_quadratic,
)
from .optimizers import Method, StoppingRule, Trajectory, Verdict, VerdictKind, run_method

__all__ = [
    "CatalogEntry",
    "CriticalClass",
    "CriticalPointClass",
    "Verdict",
    "VerdictKind",
    "classify_critical_point",
    "claim6_dichotomy_check",
    "convergence_basin_experiment",
    "example_smoothness_model",
    "example_smoothness_model_2d",
    "find_critical_points_1d",
    "line_search_property_suite",
    "remark_inequality_experiment",
]

THREADS_ENV = "CWARMIJO_THREADS"
ORIGIN_RADIUS = 1e-4


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map(fn: Callable, items: Sequence, workers: int | None) -> list:
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


# --- smoothness models for g ------------------------------------------------


def _envelope_max(a: float, r: float) -> float:
    # 6s + 4 + 1/s is convex on s > 0, so its max over [a - r, a + r] sits at an end
    return max(g_second_derivative_bound(a - r), g_second_derivative_bound(a + r))


def example_smoothness_model(shrink: float = 0.5, L0: float | None = None) -> SmoothnessModel:
    """``r(t) = shrink*|t|`` and ``L(t)`` = envelope of ``|g''|`` on ``B(t, r(t))``.

    At ``t = 0`` the model is undefined (evaluates to NaN); the GD-New block
    rule only tolerates that when the gradient there is zero.
    """
    if not 0.0 < shrink < 1.0:
        raise ValueError("shrink must lie in (0,1)")

    def r(x: Array) -> float:
        a = abs(float(x[0]))
        if a == 0.0:
            return math.nan
        return shrink * a

    def L(x: Array) -> float:
        a = abs(float(x[0]))
        if a == 0.0:
            return math.nan
        return _envelope_max(a, shrink * a)

    model = SmoothnessModel(r, L)
    return model if L0 is None else model.with_floor(L0)


def example_smoothness_model_2d(shrink: float = 0.5, L0: float | None = None) -> SmoothnessModel:
    """Full-space model for ``g(x) + g(y)``: ``r = shrink*min(|x|, |y|)``.

    The Hessian is diagonal, so the Lipschitz constant of the gradient on the
    ball is the larger of the per-axis ``|g''|`` envelopes.
    """
    if not 0.0 < shrink < 1.0:
        raise ValueError("shrink must lie in (0,1)")

    def r(z: Array) -> float:
        m = float(np.min(np.abs(z)))
        return math.nan if m == 0.0 else shrink * m

    def L(z: Array) -> float:
        rad = r(z)
        if math.isnan(rad):
            return math.nan
        return max(_envelope_max(abs(float(c)), rad) for c in z)

    model = SmoothnessModel(r, L)
    return model if L0 is None else model.with_floor(L0)


# --- critical points ------------------------------------------------------------


class CriticalClass(str, enum.Enum):
    LOCAL_MINIMUM = "LocalMinimum"
    GENERALIZED_SADDLE = "GeneralizedSaddle"
    DEGENERATE = "Degenerate"
    ORIGIN = "Origin"


@dataclass(frozen=True)
class CriticalPointClass:
    kind: CriticalClass
    eigen_signs: tuple[str, ...]
    tolerance_used: float
    near_singular: bool = False
    eigenvalues: tuple[float, ...] = ()


def _signs(eigs: Array, tol: float) -> tuple[str, ...]:
    zero = tol * (1.0 + float(np.max(np.abs(eigs)))) if eigs.size else tol
    return tuple("zero" if abs(v) <= zero else ("negative" if v < 0 else "positive") for v in eigs)


def _kind_from_signs(signs: Iterable[str]) -> CriticalClass:
    signs = tuple(signs)
    if "negative" in signs:
        return CriticalClass.GENERALIZED_SADDLE
    if "zero" in signs:
        return CriticalClass.DEGENERATE
    return CriticalClass.LOCAL_MINIMUM


def fd_hessian(f: DifferentiableFunction, z, h: float) -> Array:
    """Symmetrized central differences of the analytic gradient."""
    z = as_array(z)
    d = z.size
    H = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        H[:, j] = (f.gradient(z + e) - f.gradient(z - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


def classify_critical_point(
    f: DifferentiableFunction, z, h: float = 1e-4, tol: float = 1e-4
) -> CriticalPointClass:
    """Sign pattern of a finite-difference Hessian.

    An eigenvalue counts as zero when ``|lam| <= tol * (1 + max|lam|)``.
    Points within ``10h`` of the function's non-C^2 locus come back
    ``Degenerate`` with ``near_singular`` set.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    z = as_array(z)
    if f.singular_distance is not None and f.singular_distance(z) <= 10 * h:
        return CriticalPointClass(CriticalClass.DEGENERATE, (), tol, near_singular=True)
    eigs = np.linalg.eigvalsh(fd_hessian(f, z, h))
    signs = _signs(eigs, tol)
    return CriticalPointClass(_kind_from_signs(signs), signs, tol, eigenvalues=tuple(map(float, eigs)))


def classify_example_limit(
    f: DifferentiableFunction, z, h: float = 1e-4, tol: float = 1e-4
) -> CriticalPointClass:
    """Classify a limit point of ``g(x) + g(y)`` (or ``g``).

    Within ``ORIGIN_RADIUS`` of the origin the class is ``Origin``. Elsewhere
    the difference step shrinks with the squared distance to the axes, since
    ``g`` oscillates on the scale ``t^2``.
    """
    z = as_array(z)
    if float(np.linalg.norm(z)) < ORIGIN_RADIUS:
        return CriticalPointClass(CriticalClass.ORIGIN, (), tol)
    d = f.singular_distance(z) if f.singular_distance is not None else math.inf
    step = min(h, 1e-2 * d * d)
    if step < 1e-14:
        return CriticalPointClass(CriticalClass.DEGENERATE, (), tol, near_singular=True)
    return classify_critical_point(f, z, step, tol)


@dataclass(frozen=True)
class CatalogEntry:
    location: float
    kind: CriticalClass
    second_derivative: float


def find_critical_points_1d(
    f: DifferentiableFunction,
    window: tuple[float, float],
    grid: int = 10_000,
    xtol: float = 1e-12,
    tol: float = 1e-4,
) -> list[CatalogEntry]:
    """Sign-change scan of ``f'`` on a uniform grid, refined by bisection.

    Roots closer together than the grid spacing are missed; for ``g`` the
    roots accumulate at 0, so windows should stay clear of a neighbourhood
    of the origin.
    """
    if f.dimension != 1:
        raise ValueError("find_critical_points_1d needs a one-dimensional function")
    lo, hi = map(float, window)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError("window must be a bounded interval")
    if grid < 2:
        raise ValueError("grid must be >= 2")
    ts = np.linspace(lo, hi, grid)
    dfun = lambda t: float(f.gradient([t])[0])  # noqa: E731
    ds = np.array([dfun(t) for t in ts])
    roots = []
    for i in range(grid):
        if ds[i] == 0.0:
            roots.append(float(ts[i]))
        elif i + 1 < grid and ds[i] * ds[i + 1] < 0.0:
            roots.append(float(bisect(dfun, ts[i], ts[i + 1], xtol=xtol)))
    h = min(1e-6, (hi - lo) / (grid - 1) / 100.0)
    out = []
    for t in roots:
        d2 = (dfun(t + h) - dfun(t - h)) / (2.0 * h)
        kind = _kind_from_signs(_signs(np.array([d2]), tol))
        out.append(CatalogEntry(t, kind, d2))
    return out


def gdnew_delta_on_grid(ts: Iterable[float], params: LineSearchParams, model: SmoothnessModel, f=None) -> Array:
    """GD-New rates for ``g`` at each ``t``; used to probe that the rate stays
    bounded below on compact sets away from 0."""
    from .objective import make_example_g

    f = make_example_g() if f is None else f
    out = []
    for t in ts:
        gn = abs(float(f.gradient([t])[0]))
        r, L = model.evaluate([t])
        out.append(gdnew_delta(gn, r, L, params).delta)
    return np.array(out)


# --- randomized parameters ------------------------------------------------------


def perturb_params(base: LineSearchParams, rng: np.random.Generator, spread: float = 0.1) -> LineSearchParams:
    """Uniform ``+-spread`` relative perturbation of ``(alpha, beta, delta0)``."""
    if spread == 0:
        return LineSearchParams(base.alpha, base.beta, base.delta0)
    u = rng.uniform(-spread, spread, size=3)
    return LineSearchParams(base.alpha * (1 + u[0]), base.beta * (1 + u[1]), base.delta0 * (1 + u[2]))


# --- full-space rate vs block rates: delta(x, y) <= max(delta1, delta2) ------


@dataclass
class RemarkReport:
    instances: int
    violations: list[dict] = field(default_factory=list)
    exceeds_min: int = 0
    exhausted: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def exceeds_min_frequency(self) -> float:
        checked = self.instances - self.exhausted
        return self.exceeds_min / checked if checked else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        d["exceeds_min_frequency"] = self.exceeds_min_frequency
        return d


def random_separable_quadratic(rng: np.random.Generator):
    """Random diagonal positive-definite blocks of dimension 1..5, a point and params."""
    m1, m2 = rng.integers(1, 6, size=2)
    lam1 = 10.0 ** rng.uniform(-1, 2, size=m1)
    lam2 = 10.0 ** rng.uniform(-1, 2, size=m2)
    z = rng.normal(size=m1 + m2) * 10.0 ** rng.uniform(-2, 1)
    params = LineSearchParams(rng.uniform(0.05, 0.95), rng.uniform(0.1, 0.9), 10.0 ** rng.uniform(-1, 1))
    f = SeparableObjective(make_quadratic(lam1), make_quadratic(lam2))
    return f, z, params


def remark_deltas(f: SeparableObjective, z, params: LineSearchParams, max_halvings: int = 1000):
    full = backtracking_delta(f, z, params, max_halvings)
    d1, d2 = coordinatewise_deltas(f, z, "backtracking", params, max_halvings=max_halvings)
    return full, d1, d2


def remark_inequality_experiment(instance_count: int, seed: int = 42, max_halvings: int = 1000) -> RemarkReport:
    """Falsification harness for ``delta(x, y) <= max(delta1(x), delta2(y))``.

    Also counts how often the full-space rate strictly exceeds the smaller
    per-block rate.
    """
    if instance_count < 1:
        raise ValueError("instance_count must be >= 1")
    report = RemarkReport(instance_count)
    for i in range(instance_count):
        f, z, params = random_separable_quadratic(np.random.default_rng([seed, i]))
        full, d1, d2 = remark_deltas(f, z, params, max_halvings)
        if full.exhausted or d1.exhausted or d2.exhausted:
            report.exhausted += 1
            continue
        if full.delta > max(d1.delta, d2.delta):
            report.violations.append(
                {"instance": i, "delta": full.delta, "delta1": d1.delta, "delta2": d2.delta}
            )
        if full.delta > min(d1.delta, d2.delta):
            report.exceeds_min += 1
    return report


# --- line-search property suite ------------------------------------------------


def line_search_property_suite(instance_count: int = 1000, seed: int = 0) -> dict[str, int]:
    """Count violations of the line-search invariants on random instances.

    Returns a mapping property name -> number of violating instances.
    """
    from .objective import make_example_g

    fails = Counter(
        {k: 0 for k in ("membership", "maximality", "two_way_consistency", "gdnew_caps", "coordinatewise_armijo")}
    )
    g = make_example_g()
    model = example_smoothness_model(0.5)
    for i in range(instance_count):
        rng = np.random.default_rng([seed, i])
        f, z, params = random_separable_quadratic(rng)
        sel = backtracking_delta(f, z, params, 1000)
        if sel.exhausted:
            continue
        if sel.delta != params.rung(sel.candidates_tested - 1):
            fails["membership"] += 1
        # the rung above is delta/beta up to rounding
        if sel.rung > 0 and armijo_holds(f, z, params.rung(sel.rung - 1), params.alpha):
            fails["maximality"] += 1
        two = two_way_backtracking_delta(f, z, params.delta0, params, 1000)
        if (two.delta, two.candidates_tested) != (sel.delta, sel.candidates_tested):
            fails["two_way_consistency"] += 1
        d1, d2 = coordinatewise_deltas(f, z, "backtracking", params, max_halvings=1000)
        x, y = f.blocks(z)
        if not coordinatewise_armijo_holds(f, x, y, d1.delta, d2.delta, params.alpha):
            fails["coordinatewise_armijo"] += 1
        t = float(rng.uniform(0.01, 2.0) * rng.choice([-1.0, 1.0]))
        gn = abs(float(g.gradient([t])[0]))
        r, L = model.evaluate([t])
        sel = gdnew_delta(gn, r, L, params, 1000)
        ok = sel.delta < params.alpha / L and sel.delta * gn < r
        if sel.rung > 0:
            up = params.rung(sel.rung - 1)
            ok = ok and not (up < params.alpha / L and up * gn < r)
        if not ok:
            fails["gdnew_caps"] += 1
    return dict(fails)


# --- basin experiment -------------------------------------------------------------


@dataclass(frozen=True)
class RunOutcome:
    index: int
    z0: tuple[float, ...]
    alpha: float
    beta: float
    delta0: float
    verdict: str
    iterations: int
    final_point: tuple[float, ...]
    final_gradient_norm: float
    classification: str | None = None
    near_singular: bool = False
    case: str | None = None


@dataclass(frozen=True)
class BasinTask:
    index: int
    seed: int
    method: str
    objective: str
    lambdas: tuple | None
    lambdas2: tuple | None
    init_box: tuple
    base: tuple[float, float, float]
    spread: float
    stop: StoppingRule
    shrink: float
    L0: float | None
    hessian_step: float
    hessian_tol: float
    z0: tuple | None = None


def _draw_initial(rng: np.random.Generator, box) -> Array:
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    while True:
        z = rng.uniform(lo, hi)
        if np.all(z != 0.0):
            return z


def _models_for(task: BasinTask, f: DifferentiableFunction):
    if task.objective in ("example-g", "example-g-2d"):
        one = example_smoothness_model(task.shrink, task.L0)
        return (one, one), (example_smoothness_model_2d(task.shrink, task.L0) if f.dimension > 1 else one)
    raise ValueError(f"no smoothness model available for objective {task.objective!r}")


def _setup(task: BasinTask):
    rng = np.random.default_rng([task.seed, task.index])
    f = build_objective(task.objective, task.lambdas, task.lambdas2)
    z0 = np.array(task.z0, dtype=float) if task.z0 is not None else _draw_initial(rng, task.init_box)
    params = perturb_params(LineSearchParams(*task.base), rng, task.spread)
    models = model = None
    if Method(task.method) in (Method.GDNEW, Method.CW_GDNEW):
        models, model = _models_for(task, f)
    traj = run_method(task.method, f, z0, params, task.stop, model=model, models=models)
    return f, z0, params, traj


def _outcome(task, z0, params, traj: Trajectory, **extra) -> RunOutcome:
    return RunOutcome(
        index=task.index,
        z0=tuple(map(float, z0)),
        alpha=params.alpha,
        beta=params.beta,
        delta0=params.delta0,
        verdict=traj.verdict.kind.value,
        iterations=traj.iterations,
        final_point=tuple(map(float, traj.final_point)),
        final_gradient_norm=float(traj.verdict.final_gradient_norm),
        **extra,
    )


def _basin_worker(task: BasinTask) -> RunOutcome:
    f, z0, params, traj = _setup(task)
    cls = None
    if traj.verdict.kind is VerdictKind.CRITICAL_POINT:
        if task.objective.startswith("example-g"):
            c = classify_example_limit(f, traj.final_point, task.hessian_step, task.hessian_tol)
        else:
            c = classify_critical_point(f, traj.final_point, task.hessian_step, task.hessian_tol)
        cls = c
    return _outcome(
        task,
        z0,
        params,
        traj,
        classification=None if cls is None else cls.kind.value,
        near_singular=False if cls is None else cls.near_singular,
    )


@dataclass
class ExperimentReport:
    kind: str
    sample_count: int
    outcomes: list[RunOutcome]
    verdict_counts: dict[str, int]
    class_counts: dict[str, int]
    extra: dict = field(default_factory=dict)

    def fraction(self, key: str, among: str = "all") -> float:
        if among == "all":
            return self.verdict_counts.get(key, 0) / self.sample_count
        denom = self.verdict_counts.get(among, 0)
        return self.class_counts.get(key, 0) / denom if denom else 0.0

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "sample_count": self.sample_count,
            "verdict_counts": self.verdict_counts,
            "class_counts": self.class_counts,
            **self.extra,
        }


def _counts(values: Iterable[str | None]) -> dict[str, int]:
    return dict(sorted(Counter(v for v in values if v is not None).items()))


def convergence_basin_experiment(
    method: str = "coordinatewise-gdnew",
    objective: str = "example-g-2d",
    sample_count: int = 1000,
    init_box: Sequence[Sequence[float]] = ((-1.0, 1.0), (-1.0, 1.0)),
    base_params: LineSearchParams = LineSearchParams(0.5, 0.5, 1.0),
    spread: float = 0.1,
    seed: int = 0,
    stop: StoppingRule = StoppingRule(),
    shrink: float = 0.5,
    L0: float | None = None,
    hessian_step: float = 1e-4,
    hessian_tol: float = 1e-4,
    workers: int | None = None,
    lambdas: Sequence[float] | None = None,
    lambdas2: Sequence[float] | None = None,
    initial_points: Sequence[Sequence[float]] | None = None,
) -> ExperimentReport:
    """Run ``method`` from random initial points and tally limit classes.

    ``initial_points`` overrides the random draw (``sample_count`` is then its
    length). Each run re-draws ``(alpha, beta, delta0)`` uniformly within
    ``+-spread`` of ``base_params``.
    """
    Method(method)
    if initial_points is not None:
        sample_count = len(initial_points)
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    tasks = [
        BasinTask(
            i, seed, method, objective,
            None if lambdas is None else tuple(lambdas),
            None if lambdas2 is None else tuple(lambdas2),
            tuple(map(tuple, init_box)),
            (base_params.alpha, base_params.beta, base_params.delta0),
            spread, stop, shrink, L0, hessian_step, hessian_tol,
            None if initial_points is None else tuple(map(float, initial_points[i])),
        )
        for i in range(sample_count)
    ]
    outcomes = _map(_basin_worker, tasks, workers)
    return ExperimentReport(
        "basin",
        sample_count,
        outcomes,
        _counts(o.verdict for o in outcomes),
        _counts(o.classification for o in outcomes),
        {"method": method, "objective": objective, "near_singular": sum(o.near_singular for o in outcomes)},
    )


# --- full-space GD-New dichotomy on g(x) + g(y) ---------------------------------


def dichotomy_case(
    traj: Trajectory, axis_tol: float = 1e-3, late_fraction: float = 0.05
) -> str:
    """``"case1"`` (critical limit off the axes), ``"case2"`` (late iterates
    hug one axis, with no gap in their spread larger than a late step) or
    ``"anomaly"``."""
    v = traj.verdict
    if v.kind is VerdictKind.CRITICAL_POINT and float(np.min(np.abs(v.limit_point))) > axis_tol:
        return "case1"
    k = max(1, int(math.ceil(late_fraction * len(traj))))
    late = traj.points[-k:]
    steps = traj.step_norms[-k:]
    max_step = float(np.nanmax(steps)) if np.any(np.isfinite(steps)) else 0.0
    for axis in range(late.shape[1]):
        if np.all(np.abs(late[:, axis]) <= axis_tol):
            others = np.delete(late, axis, axis=1)
            ok = True
            for col in others.T:
                s = np.sort(col)
                if s.size > 1 and float(np.max(np.diff(s))) > max_step * (1 + 1e-12):
                    ok = False
            if ok:
                return "case2"
    return "anomaly"


def _claim6_worker(task: BasinTask) -> RunOutcome:
    f, z0, params, traj = _setup(task)
    return _outcome(task, z0, params, traj, case=dichotomy_case(traj))


def claim6_dichotomy_check(
    sample_count: int = 1000,
    seed: int = 0,
    base_params: LineSearchParams = LineSearchParams(0.5, 0.5, 1.0),
    spread: float = 0.0,
    init_box: Sequence[Sequence[float]] = ((-1.0, 1.0), (-1.0, 1.0)),
    stop: StoppingRule = StoppingRule(),
    shrink: float = 0.5,
    L0: float | None = None,
    workers: int | None = None,
    initial_points: Sequence[Sequence[float]] | None = None,
) -> ExperimentReport:
    """Full-space GD-New on ``g(x) + g(y)``: every run should either converge
    to a critical point off the axes or end up clustering along one axis."""
    if initial_points is not None:
        sample_count = len(initial_points)
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    tasks = [
        BasinTask(
            i, seed, Method.GDNEW.value, "example-g-2d", None, None,
            tuple(map(tuple, init_box)),
            (base_params.alpha, base_params.beta, base_params.delta0),
            spread, stop, shrink, L0, 1e-4, 1e-4,
            None if initial_points is None else tuple(map(float, initial_points[i])),
        )
        for i in range(sample_count)
    ]
    outcomes = _map(_claim6_worker, tasks, workers)
    cases = _counts(o.case for o in outcomes)
    for key in ("case1", "case2", "anomaly"):
        cases.setdefault(key, 0)
    return ExperimentReport(
        "claim6",
        sample_count,
        outcomes,
        _counts(o.verdict for o in outcomes),
        dict(sorted(cases.items())),
        {"anomalies": cases["anomaly"]},
    )
