"""Objective functions: a small value/gradient abstraction, separable sums,
the oscillating example ``g(t) = t^3 sin(1/t)`` and finite-difference checks."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

Array = npt.NDArray[np.float64]


class DimensionError(ValueError):
    """Point length does not match the function's dimension."""


@dataclass(frozen=True)
class Point:
    """Coordinates with an optional ``(m1, m2)`` split into blocks ``(x, y)``."""

    coordinates: Array
    split: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        coords = np.array(self.coordinates, dtype=float).reshape(-1)
        object.__setattr__(self, "coordinates", coords)
        if self.split is not None:
            m1, m2 = self.split
            if m1 < 1 or m2 < 1 or m1 + m2 != coords.size:
                raise DimensionError(
                    f"block split {self.split} does not add up to {coords.size}"
                )

    @property
    def x(self) -> Array:
        if self.split is None:
            raise ValueError("point has no block split")
        return self.coordinates[: self.split[0]]

    @property
    def y(self) -> Array:
        if self.split is None:
            raise ValueError("point has no block split")
        return self.coordinates[self.split[0] :]


def as_array(p: Point | Sequence[float] | Array | float) -> Array:
    if isinstance(p, Point):
        return p.coordinates
    return np.array(p, dtype=float).reshape(-1)


class DifferentiableFunction:
    """A real-valued function on R^d with an analytic gradient.

    ``singular_distance`` optionally maps a point to its distance from the
    locus where the function stops being C^2; finite-difference utilities use
    it to refuse (or flag) evaluations that straddle that locus.
    """

    def __init__(
        self,
        dimension: int,
        value: Callable[[Array], float],
        gradient: Callable[[Array], Array],
        *,
        name: str = "",
        singular_distance: Callable[[Array], float] | None = None,
    ) -> None:
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)
        self._value = value
        self._gradient = gradient
        self.name = name
        self.singular_distance = singular_distance

    def _check(self, p) -> Array:
        z = as_array(p)
        if z.size != self.dimension:
            raise DimensionError(
                f"{self.name or 'function'} expects dimension {self.dimension}, got {z.size}"
            )
        return z

    def value(self, p) -> float:
        return float(self._value(self._check(p)))

    def gradient(self, p) -> Array:
        return np.asarray(self._gradient(self._check(p)), dtype=float).reshape(-1)

    __call__ = value

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, dimension={self.dimension})"


class SeparableObjective(DifferentiableFunction):
    """``f(x, y) = f1(x) + f2(y)`` over ``R^m1 x R^m2``."""

    def __init__(
        self,
        block1: DifferentiableFunction,
        block2: DifferentiableFunction,
        *,
        name: str = "",
    ) -> None:
        self.block1 = block1
        self.block2 = block2
        m1 = block1.dimension

        def value(z: Array) -> float:
            return block1.value(z[:m1]) + block2.value(z[m1:])

        def gradient(z: Array) -> Array:
            return np.concatenate([block1.gradient(z[:m1]), block2.gradient(z[m1:])])

        def singular(z: Array) -> float:
            d = math.inf
            if block1.singular_distance is not None:
                d = min(d, block1.singular_distance(z[:m1]))
            if block2.singular_distance is not None:
                d = min(d, block2.singular_distance(z[m1:]))
            return d

        has_singular = block1.singular_distance is not None or block2.singular_distance is not None

        super().__init__(
            m1 + block2.dimension,
            value,
            gradient,
            name=name or f"{block1.name}+{block2.name}",
            singular_distance=singular if has_singular else None,
        )

    @property
    def split(self) -> tuple[int, int]:
        return self.block1.dimension, self.block2.dimension

    def blocks(self, p) -> tuple[Array, Array]:
        z = self._check(p)
        m1 = self.block1.dimension
        return z[:m1], z[m1:]

    def point(self, x, y) -> Point:
        return Point(np.concatenate([as_array(x), as_array(y)]), self.split)


def evaluate(f: DifferentiableFunction, p) -> float:
    return f.value(p)


def grad(f: DifferentiableFunction, p) -> Array:
    return f.gradient(p)


# --- example and corpus functions -------------------------------------------


def _g_value(z: Array) -> float:
    t = float(z[0])
    if t == 0.0:
        return 0.0
    return t**3 * math.sin(1.0 / t)


def _g_gradient(z: Array) -> Array:
    t = float(z[0])
    if t == 0.0:
        return np.zeros(1)
    u = 1.0 / t
    return np.array([3.0 * t * t * math.sin(u) - t * math.cos(u)])


def make_example_g() -> DifferentiableFunction:
    """``g(t) = t^3 sin(1/t)``, extended by ``g(0) = g'(0) = 0``."""
    return DifferentiableFunction(
        1, _g_value, _g_gradient, name="g", singular_distance=lambda z: abs(float(z[0]))
    )


def make_example_g2d() -> SeparableObjective:
    """``f(x, y) = g(x) + g(y)``."""
    return SeparableObjective(make_example_g(), make_example_g(), name="g+g")


def g_second_derivative(t: float) -> float:
    """Closed form ``6t sin(1/t) - 4 cos(1/t) - sin(1/t)/t``; undefined at 0."""
    if t == 0:
        raise ValueError("g'' does not exist at t = 0")
    u = 1.0 / t
    return 6.0 * t * math.sin(u) - 4.0 * math.cos(u) - math.sin(u) * u


def g_second_derivative_bound(t: float) -> float:
    """Envelope ``6|t| + 4 + 1/|t|`` dominating ``|g''(t)|``."""
    a = abs(t)
    return 6.0 * a + 4.0 + 1.0 / a


def make_quadratic(lambdas: Sequence[float] | float, center=None) -> DifferentiableFunction:
    """Diagonal quadratic ``0.5 * sum(lam_i * (z_i - c_i)^2)``; lambdas may be negative."""
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    c = np.zeros_like(lam) if center is None else np.broadcast_to(
        np.asarray(center, dtype=float), lam.shape
    ).copy()

    def value(z: Array) -> float:
        d = z - c
        return 0.5 * float(np.dot(lam * d, d))

    def gradient(z: Array) -> Array:
        return lam * (z - c)

    return DifferentiableFunction(lam.size, value, gradient, name=f"quadratic{lam.size}")


def make_rosenbrock(a: float = 1.0, b: float = 100.0) -> DifferentiableFunction:
    def value(z: Array) -> float:
        x, y = z
        return (a - x) ** 2 + b * (y - x * x) ** 2

    def gradient(z: Array) -> Array:
        x, y = z
        return np.array([-2.0 * (a - x) - 4.0 * b * x * (y - x * x), 2.0 * b * (y - x * x)])

    return DifferentiableFunction(2, value, gradient, name="rosenbrock")


# --- finite differences -------------------------------------------------------


def fd_gradient(f: DifferentiableFunction, p, h: float = 1e-6) -> Array:
    z = f._check(p)
    out = np.empty_like(z)
    for i in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        out[i] = (f.value(zp) - f.value(zm)) / (2.0 * h)
    return out


def fd_gradient_check(f: DifferentiableFunction, p, h: float = 1e-6) -> float:
    """Max relative error between ``f.gradient`` and a central difference.

    Coordinates where both the analytic and numerical derivatives are below
    1e-12 in magnitude count as exact.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    z = f._check(p)
    if f.singular_distance is not None and f.singular_distance(z) <= 10 * h:
        raise ValueError("point lies within 10h of the function's non-smooth locus")
    analytic = f.gradient(z)
    numeric = fd_gradient(f, z, h)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    err = np.abs(analytic - numeric)
    rel = np.where(scale > 1e-12, err / np.where(scale > 0, scale, 1.0), 0.0)
    return float(rel.max())


OBJECTIVES = ("quadratic", "separable-quadratic", "example-g", "example-g-2d", "rosenbrock")


def build_objective(
    name: str,
    lambdas: Sequence[float] | None = None,
    lambdas2: Sequence[float] | None = None,
) -> DifferentiableFunction:
    """Construct a registered objective from plain data (picklable arguments)."""
    if name == "quadratic":
        return make_quadratic(lambdas if lambdas is not None else [1.0])
    if name == "separable-quadratic":
        return SeparableObjective(
            make_quadratic(lambdas if lambdas is not None else [1.0]),
            make_quadratic(lambdas2 if lambdas2 is not None else [1.0]),
        )
    if name == "example-g":
        return make_example_g()
    if name == "example-g-2d":
        return make_example_g2d()
    if name == "rosenbrock":
        return make_rosenbrock()
    raise ValueError(f"unknown objective {name!r}")
