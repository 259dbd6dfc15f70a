"""Iteration drivers for the gradient-descent family.

Every driver produces a :class:`Trajectory`. Coordinate-wise drivers update
both blocks simultaneously from the same iterate (Jacobi style).
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field

import numpy as np

from .linesearch import (
    DEFAULT_MAX_HALVINGS,
    DeltaSelection,
    InvalidModelError,
    LineSearchParams,
    SmoothnessModel,
    backtracking_delta,
    coordinatewise_deltas,
    gdnew_delta,
    two_way_backtracking_delta,
)
from .objective import Array, DifferentiableFunction, SeparableObjective


class Method(str, enum.Enum):
    STANDARD = "standard"
    BACKTRACKING = "backtracking"
    TWO_WAY = "two-way"
    GDNEW = "gdnew"
    CW_BACKTRACKING = "coordinatewise-backtracking"
    CW_TWO_WAY = "coordinatewise-two-way"
    CW_GDNEW = "coordinatewise-gdnew"

    @property
    def coordinatewise(self) -> bool:
        return self.value.startswith("coordinatewise")

    @property
    def armijo_family(self) -> bool:
        return self in (Method.BACKTRACKING, Method.TWO_WAY, Method.CW_BACKTRACKING, Method.CW_TWO_WAY)


class VerdictKind(str, enum.Enum):
    CRITICAL_POINT = "CriticalPoint"
    DIVERGED = "DivergedToInfinity"
    MAX_ITERATIONS = "MaxIterations"
    BREAKDOWN = "NumericalBreakdown"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    final_gradient_norm: float
    limit_point: Array | None = None
    reason: str = ""

    def __post_init__(self) -> None:
        if (self.limit_point is not None) != (self.kind is VerdictKind.CRITICAL_POINT):
            raise ValueError("limit_point is present iff the verdict is CriticalPoint")


@dataclass(frozen=True)
class StoppingRule:
    max_iterations: int = 100_000
    gradient_tolerance: float = 1e-8
    divergence_radius: float = 1e8
    stall_step_tolerance: float = 0.0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if not self.divergence_radius > 0:
            raise ValueError("divergence_radius must be positive")
        if not self.stall_step_tolerance >= 0:
            raise ValueError("stall_step_tolerance must be non-negative")


@dataclass(frozen=True)
class IterateRecord:
    n: int
    point: Array
    value: float
    gradient_norm: float
    deltas: tuple[float, ...] | None = None
    step_norm: float | None = None


def classify_termination(record: IterateRecord, stop: StoppingRule) -> Verdict | None:
    """Verdict for the latest iterate, or ``None`` to keep iterating."""
    gn = record.gradient_norm
    if not (math.isfinite(record.value) and math.isfinite(gn) and np.all(np.isfinite(record.point))):
        return Verdict(VerdictKind.BREAKDOWN, gn, reason="non-finite value or gradient")
    if gn < stop.gradient_tolerance:
        return Verdict(VerdictKind.CRITICAL_POINT, gn, np.array(record.point, copy=True))
    if float(np.linalg.norm(record.point)) > stop.divergence_radius:
        return Verdict(VerdictKind.DIVERGED, gn)
    if record.n >= stop.max_iterations:
        return Verdict(VerdictKind.MAX_ITERATIONS, gn)
    return None


@dataclass
class Trajectory:
    """Recorded iterates as column arrays.

    ``deltas[k]`` holds the rate(s) used to leave record ``k`` (second column
    NaN for full-space methods) and ``step_norms[k]`` the length of that
    step; both are NaN on the final record.
    """

    method: Method
    params: LineSearchParams | float
    indices: Array
    points: Array
    values: Array
    gradient_norms: Array
    deltas: Array
    step_norms: Array
    candidates: Array
    verdict: Verdict
    split: tuple[int, int] | None = None
    stride: int = 1

    @property
    def iterations(self) -> int:
        return int(self.indices[-1])

    @property
    def final_point(self) -> Array:
        return self.points[-1]

    def __len__(self) -> int:
        return len(self.indices)

    def record(self, k: int) -> IterateRecord:
        last = k == len(self) - 1 or k == -1
        d = None
        if not last:
            d = (float(self.deltas[k, 0]),) if not self.method.coordinatewise else (
                float(self.deltas[k, 0]),
                float(self.deltas[k, 1]),
            )
        return IterateRecord(
            int(self.indices[k]),
            self.points[k],
            float(self.values[k]),
            float(self.gradient_norms[k]),
            d,
            None if last else float(self.step_norms[k]),
        )

    @property
    def records(self) -> Iterator[IterateRecord]:
        return (self.record(k) for k in range(len(self)))


@dataclass
class _Recorder:
    stride: int
    rows: list = field(default_factory=list)

    def add(self, n, z, fz, gn, deltas, step, tested, force=False):
        if force or n % self.stride == 0:
            self.rows.append((n, z.copy(), fz, gn, deltas, step, tested))


# select(z, value, gradient) -> (per-coordinate scale, (d1, d2), candidates tested)
Selector = Callable[[Array, float, Array], tuple[object, tuple[float, float], int]]


class _Abort(Exception):
    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


def _drive(
    f: DifferentiableFunction,
    z0,
    select: Selector,
    stop: StoppingRule,
    method: Method,
    params,
    stride: int = 1,
    split=None,
) -> Trajectory:
    if stride < 1:
        raise ValueError("stride must be >= 1")
    z = f._check(z0).astype(float, copy=True)
    rec = _Recorder(stride)
    n = 0
    nan2 = (math.nan, math.nan)
    verdict = None
    while verdict is None:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                fz = f.value(z)
                g = f.gradient(z)
        except ArithmeticError:
            fz, g = math.nan, np.full_like(z, math.nan)
        gn = float(np.linalg.norm(g))
        verdict = classify_termination(IterateRecord(n, z, fz, gn), stop)
        if verdict is not None:
            rec.add(n, z, fz, gn, nan2, math.nan, 0, force=True)
            break
        try:
            scale, deltas, tested = select(z, fz, g)
        except (_Abort, InvalidModelError) as exc:
            verdict = Verdict(VerdictKind.BREAKDOWN, gn, reason=str(exc))
            rec.add(n, z, fz, gn, nan2, math.nan, 0, force=True)
            break
        z_new = z - scale * g
        step = float(np.linalg.norm(z_new - z))
        if step <= stop.stall_step_tolerance:
            verdict = Verdict(VerdictKind.BREAKDOWN, gn, reason="stalled")
            rec.add(n, z, fz, gn, nan2, math.nan, tested, force=True)
            break
        rec.add(n, z, fz, gn, deltas, step, tested)
        z = z_new
        n += 1

    rows = rec.rows
    dim = z.size
    return Trajectory(
        method=method,
        params=params,
        indices=np.array([r[0] for r in rows], dtype=np.int64),
        points=np.array([r[1] for r in rows], dtype=float).reshape(len(rows), dim),
        values=np.array([r[2] for r in rows], dtype=float),
        gradient_norms=np.array([r[3] for r in rows], dtype=float),
        deltas=np.array([r[4] for r in rows], dtype=float).reshape(len(rows), 2),
        step_norms=np.array([r[5] for r in rows], dtype=float),
        candidates=np.array([r[6] for r in rows], dtype=np.int64),
        verdict=verdict,
        split=split,
        stride=stride,
    )


def _checked(sel: DeltaSelection) -> DeltaSelection:
    if sel.exhausted:
        raise _Abort("line search exhausted")
    return sel


def run_standard_gd(
    f: DifferentiableFunction, z0, delta0: float, stop: StoppingRule = StoppingRule(), stride: int = 1
) -> Trajectory:
    """Constant learning rate ``delta0``."""
    if not delta0 > 0:
        raise ValueError("delta0 must be positive")

    def select(z, fz, g):
        return delta0, (delta0, math.nan), 0

    return _drive(f, z0, select, stop, Method.STANDARD, float(delta0), stride)


def run_backtracking_gd(
    f: DifferentiableFunction,
    z0,
    params: LineSearchParams,
    stop: StoppingRule = StoppingRule(),
    stride: int = 1,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
) -> Trajectory:
    def select(z, fz, g):
        sel = _checked(backtracking_delta(f, z, params, max_halvings, value=fz, gradient=g))
        return sel.delta, (sel.delta, math.nan), sel.candidates_tested

    return _drive(f, z0, select, stop, Method.BACKTRACKING, params, stride)


def run_two_way_backtracking_gd(
    f: DifferentiableFunction,
    z0,
    params: LineSearchParams,
    stop: StoppingRule = StoppingRule(),
    stride: int = 1,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
) -> Trajectory:
    """Each search starts from the previous accepted rate (``delta0`` at first)."""
    previous = [params.delta0]

    def select(z, fz, g):
        sel = _checked(
            two_way_backtracking_delta(f, z, previous[0], params, max_halvings, value=fz, gradient=g)
        )
        previous[0] = sel.delta
        return sel.delta, (sel.delta, math.nan), sel.candidates_tested

    return _drive(f, z0, select, stop, Method.TWO_WAY, params, stride)


def run_gdnew(
    f: DifferentiableFunction,
    z0,
    params: LineSearchParams,
    model: SmoothnessModel,
    stop: StoppingRule = StoppingRule(),
    stride: int = 1,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
) -> Trajectory:
    """Full-space GD-New: one rate capped by ``alpha/L(z)`` and ``r(z)/|grad|``."""

    def select(z, fz, g):
        gn = float(np.linalg.norm(g))
        r, L = model.evaluate(z)
        sel = _checked(gdnew_delta(gn, r, L, params, max_halvings))
        return sel.delta, (sel.delta, math.nan), sel.candidates_tested

    return _drive(f, z0, select, stop, Method.GDNEW, params, stride)


def _cw_select(f: SeparableObjective, method, params, models, max_halvings, two_way=False):
    m1, m2 = f.split
    state = [None]

    def select(z, fz, g):
        s1, s2 = coordinatewise_deltas(
            f, z, method, params, models, state[0], max_halvings, gradient=g
        )
        _checked(s1)
        _checked(s2)
        if two_way:
            state[0] = (s1.delta, s2.delta)
        scale = np.concatenate([np.full(m1, s1.delta), np.full(m2, s2.delta)])
        return scale, (s1.delta, s2.delta), s1.candidates_tested + s2.candidates_tested

    return select


def run_coordinatewise_backtracking_gd(
    f: SeparableObjective,
    z0,
    params: LineSearchParams,
    stop: StoppingRule = StoppingRule(),
    stride: int = 1,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
) -> Trajectory:
    select = _cw_select(f, "backtracking", params, None, max_halvings)
    return _drive(f, z0, select, stop, Method.CW_BACKTRACKING, params, stride, f.split)


def run_coordinatewise_two_way_gd(
    f: SeparableObjective,
    z0,
    params: LineSearchParams,
    stop: StoppingRule = StoppingRule(),
    stride: int = 1,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
) -> Trajectory:
    """Two-way search run separately per block, each block keeping its own previous rate."""
    select = _cw_select(f, "two-way", params, None, max_halvings, two_way=True)
    return _drive(f, z0, select, stop, Method.CW_TWO_WAY, params, stride, f.split)


def run_coordinatewise_gdnew(
    f: SeparableObjective,
    z0,
    params: LineSearchParams,
    models: tuple[SmoothnessModel, SmoothnessModel],
    stop: StoppingRule = StoppingRule(),
    stride: int = 1,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
) -> Trajectory:
    select = _cw_select(f, "gdnew", params, models, max_halvings)
    return _drive(f, z0, select, stop, Method.CW_GDNEW, params, stride, f.split)


def run_method(
    method: Method | str,
    f: DifferentiableFunction,
    z0,
    params: LineSearchParams,
    stop: StoppingRule = StoppingRule(),
    *,
    model: SmoothnessModel | None = None,
    models: tuple[SmoothnessModel, SmoothnessModel] | None = None,
    stride: int = 1,
) -> Trajectory:
    """Dispatch by method tag; standard GD uses ``params.delta0`` as its fixed rate."""
    method = Method(method)
    if method.coordinatewise and not isinstance(f, SeparableObjective):
        raise ValueError(f"{method.value} needs a separable objective")
    if method is Method.STANDARD:
        return run_standard_gd(f, z0, params.delta0, stop, stride)
    if method is Method.BACKTRACKING:
        return run_backtracking_gd(f, z0, params, stop, stride)
    if method is Method.TWO_WAY:
        return run_two_way_backtracking_gd(f, z0, params, stop, stride)
    if method is Method.GDNEW:
        if model is None:
            raise ValueError("gdnew needs a smoothness model")
        return run_gdnew(f, z0, params, model, stop, stride)
    if method is Method.CW_BACKTRACKING:
        return run_coordinatewise_backtracking_gd(f, z0, params, stop, stride)
    if method is Method.CW_TWO_WAY:
        return run_coordinatewise_two_way_gd(f, z0, params, stop, stride)
    if models is None:
        raise ValueError("coordinatewise-gdnew needs a pair of smoothness models")
    return run_coordinatewise_gdnew(f, z0, params, models, stop, stride)
