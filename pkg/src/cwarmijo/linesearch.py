"""Armijo conditions and backtracking learning-rate selection.

All selection rules search the ladder ``delta0, beta*delta0, beta^2*delta0, ...``.
Rungs are produced by repeated multiplication and cached on the params object
so that every rule (including two-way search, which walks the ladder in both
directions) returns bit-identical members of the same set.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .objective import Array, DifferentiableFunction, SeparableObjective, as_array

DEFAULT_MAX_HALVINGS = 1000


class InvalidModelError(ValueError):
    """A smoothness model returned a non-positive or non-finite radius/constant."""


@dataclass(frozen=True)
class LineSearchParams:
    alpha: float
    beta: float
    delta0: float
    _rungs: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        errors = validate_params(self.alpha, self.beta, self.delta0)
        if errors:
            raise ValueError("; ".join(errors))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "delta0", float(self.delta0))

    def rung(self, n: int) -> float:
        """``beta**n * delta0``, computed by repeated multiplication."""
        rungs = self._rungs
        if not rungs:
            rungs.append(self.delta0)
        while len(rungs) <= n:
            rungs.append(rungs[-1] * self.beta)
        return rungs[n]

    def rung_at_or_below(self, delta: float) -> int:
        """Index of the largest rung that does not exceed ``delta``."""
        if delta >= self.delta0:
            return 0
        n = max(0, int(math.floor(math.log(delta / self.delta0) / math.log(self.beta))) - 1)
        while self.rung(n) > delta:
            n += 1
        while n > 0 and self.rung(n - 1) <= delta:
            n -= 1
        return n


def validate_params(alpha, beta, delta0) -> list[str]:
    errors = []
    if not (isinstance(alpha, (int, float)) and 0.0 < alpha < 1.0):
        errors.append("alpha must lie in (0,1)")
    if not (isinstance(beta, (int, float)) and 0.0 < beta < 1.0):
        errors.append("beta must lie in (0,1)")
    if not (isinstance(delta0, (int, float)) and delta0 > 0.0 and math.isfinite(delta0)):
        errors.append("delta0 must be positive")
    return errors


@dataclass(frozen=True)
class SmoothnessModel:
    """Local smoothness data for one block: ``grad f`` is ``L(x)``-Lipschitz
    on the ball ``B(x, r(x))``."""

    r: Callable[[Array], float]
    L: Callable[[Array], float]

    def evaluate(self, x) -> tuple[float, float]:
        x = as_array(x)
        try:
            return float(self.r(x)), float(self.L(x))
        except ArithmeticError:
            return math.nan, math.nan

    def with_floor(self, L0: float) -> "SmoothnessModel":
        """Same radius, Lipschitz constant replaced by ``max(L(x), L0)``."""
        if not L0 > 0:
            raise ValueError("L0 must be positive")
        base = self.L
        return SmoothnessModel(self.r, lambda x: max(base(x), L0))


@dataclass(frozen=True)
class DeltaSelection:
    delta: float
    candidates_tested: int
    exhausted: bool = False
    rung: int | None = None


def _trial_value(f: DifferentiableFunction, z: Array) -> float:
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            v = f.value(z)
    except (OverflowError, ZeroDivisionError):
        return math.nan
    return v


def _armijo(f, z, fz, g, gnorm2, delta, alpha) -> bool:
    trial = _trial_value(f, z - delta * g)
    if not math.isfinite(trial):
        return False
    rhs = -alpha * delta * gnorm2
    if rhs == 0.0 and np.any(g):
        # the required decrease underflowed; 0 <= 0 would certify nothing
        return False
    return trial - fz <= rhs


def armijo_holds(f: DifferentiableFunction, z, delta: float, alpha: float) -> bool:
    """``f(z - delta*grad) - f(z) <= -alpha * delta * |grad|^2``; equality passes."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    z = as_array(z)
    g = f.gradient(z)
    return _armijo(f, z, f.value(z), g, float(np.dot(g, g)), delta, alpha)


def coordinatewise_armijo_holds(
    f: SeparableObjective, x, y, delta1: float, delta2: float, alpha: float
) -> bool:
    """Summed Armijo inequality with one learning rate per block."""
    if delta1 <= 0 or delta2 <= 0:
        raise ValueError("deltas must be positive")
    x, y = as_array(x), as_array(y)
    g1 = f.block1.gradient(x)
    g2 = f.block2.gradient(y)
    z = np.concatenate([x, y])
    trial = _trial_value(f, np.concatenate([x - delta1 * g1, y - delta2 * g2]))
    if not math.isfinite(trial):
        return False
    rhs = -alpha * (delta1 * float(np.dot(g1, g1)) + delta2 * float(np.dot(g2, g2)))
    if rhs == 0.0 and (np.any(g1) or np.any(g2)):
        return False
    return trial - f.value(z) <= rhs


def _backtrack(f, z, fz, g, params, start, max_halvings) -> DeltaSelection:
    gnorm2 = float(np.dot(g, g))
    n = start
    for k in range(1, max_halvings + 1):
        delta = params.rung(n)
        if _armijo(f, z, fz, g, gnorm2, delta, params.alpha):
            return DeltaSelection(delta, k, False, n)
        if k < max_halvings:
            n += 1
    return DeltaSelection(params.rung(n), max_halvings, True, n)


def backtracking_delta(
    f: DifferentiableFunction,
    z,
    params: LineSearchParams,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
    *,
    value: float | None = None,
    gradient: Array | None = None,
) -> DeltaSelection:
    """Largest rung satisfying Armijo's condition at ``z``.

    ``value``/``gradient`` may be passed when the caller already has them.
    """
    if max_halvings < 1:
        raise ValueError("max_halvings must be >= 1")
    z = as_array(z)
    g = f.gradient(z) if gradient is None else gradient
    fz = f.value(z) if value is None else value
    return _backtrack(f, z, fz, g, params, 0, max_halvings)


def two_way_backtracking_delta(
    f: DifferentiableFunction,
    z,
    previous_delta: float,
    params: LineSearchParams,
    max_moves: int = DEFAULT_MAX_HALVINGS,
    *,
    value: float | None = None,
    gradient: Array | None = None,
) -> DeltaSelection:
    """Start at the previous step's rate and walk the ladder up or down.

    If Armijo holds at the start, divide by ``beta`` while it keeps holding
    and the rate stays at or below ``delta0``; otherwise multiply by ``beta``
    until it holds. A ``previous_delta`` off the ladder is snapped down to the
    nearest rung.
    """
    if previous_delta <= 0:
        raise ValueError("previous_delta must be positive")
    if max_moves < 1:
        raise ValueError("max_moves must be >= 1")
    z = as_array(z)
    g = f.gradient(z) if gradient is None else gradient
    fz = f.value(z) if value is None else value
    gnorm2 = float(np.dot(g, g))
    n = params.rung_at_or_below(previous_delta)
    if not _armijo(f, z, fz, g, gnorm2, params.rung(n), params.alpha):
        if max_moves == 1:
            return DeltaSelection(params.rung(n), 1, True, n)
        sel = _backtrack(f, z, fz, g, params, n + 1, max_moves - 1)
        return DeltaSelection(sel.delta, sel.candidates_tested + 1, sel.exhausted, sel.rung)
    tested = 1
    while n > 0 and tested < max_moves:
        tested += 1
        if not _armijo(f, z, fz, g, gnorm2, params.rung(n - 1), params.alpha):
            break
        n -= 1
    return DeltaSelection(params.rung(n), tested, False, n)


def gdnew_delta(
    gradient_norm: float,
    r_at_x: float,
    L_at_x: float,
    params: LineSearchParams,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
) -> DeltaSelection:
    """Largest rung with ``delta < alpha/L`` and ``delta*|grad| < r`` (both strict)."""
    if not (r_at_x > 0 and math.isfinite(r_at_x)):
        raise InvalidModelError(f"radius must be positive and finite, got {r_at_x}")
    if not (L_at_x > 0 and math.isfinite(L_at_x)):
        raise InvalidModelError(f"Lipschitz constant must be positive and finite, got {L_at_x}")
    cap = params.alpha / L_at_x
    for k in range(max_halvings):
        delta = params.rung(k)
        if delta < cap and delta * gradient_norm < r_at_x:
            return DeltaSelection(delta, k + 1, False, k)
    n = max_halvings - 1
    return DeltaSelection(params.rung(n), max_halvings, True, n)


def gdnew_block_delta(
    model: SmoothnessModel,
    x,
    gradient: Array,
    params: LineSearchParams,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
) -> DeltaSelection:
    """GD-New rate for one block; a zero gradient short-circuits to ``delta0``
    so that points where the model is undefined (the example's t = 0) still
    produce a (zero) step."""
    gn = float(np.linalg.norm(gradient))
    r, L = model.evaluate(x)
    if gn == 0.0 and not (r > 0 and L > 0 and math.isfinite(r) and math.isfinite(L)):
        return DeltaSelection(params.delta0, 0, False, 0)
    return gdnew_delta(gn, r, L, params, max_halvings)


METHODS_CW = ("backtracking", "two-way", "gdnew")


def coordinatewise_deltas(
    f: SeparableObjective,
    z,
    method: str,
    params: LineSearchParams,
    models: tuple[SmoothnessModel, SmoothnessModel] | None = None,
    state: tuple[float, float] | None = None,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
    *,
    gradient: Array | None = None,
) -> tuple[DeltaSelection, DeltaSelection]:
    """Per-block learning rates ``(delta1(x), delta2(y))``, chosen independently.

    ``method`` is ``"backtracking"`` (alias ``"plain-backtracking"``),
    ``"two-way"`` (``state`` holds the previous pair of rates) or ``"gdnew"``
    (``models`` required).
    """
    if method == "plain-backtracking":
        method = "backtracking"
    if method not in METHODS_CW:
        raise ValueError(f"unknown coordinate-wise method {method!r}")
    if method == "gdnew" and models is None:
        raise ValueError("gdnew selection requires a pair of smoothness models")
    x, y = f.blocks(z)
    m1 = f.block1.dimension
    grads = (None, None) if gradient is None else (gradient[:m1], gradient[m1:])
    out = []
    for i, (block, w) in enumerate(((f.block1, x), (f.block2, y))):
        g = block.gradient(w) if grads[i] is None else grads[i]
        if method == "gdnew":
            out.append(gdnew_block_delta(models[i], w, g, params, max_halvings))
        elif method == "two-way" and state is not None:
            out.append(two_way_backtracking_delta(block, w, state[i], params, max_halvings, gradient=g))
        else:
            out.append(backtracking_delta(block, w, params, max_halvings, gradient=g))
    return out[0], out[1]
