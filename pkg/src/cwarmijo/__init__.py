"""Gradient descent with standard and coordinate-wise Armijo backtracking."""

__version__ = "0.1.0"

from .linesearch import (
    DeltaSelection,
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
    DifferentiableFunction,
    Point,
    SeparableObjective,
    evaluate,
    fd_gradient_check,
    g_second_derivative,
    grad,
    make_example_g,
    make_example_g2d,
    make_quadratic,
)
from .optimizers import (
    Method,
    StoppingRule,
    Trajectory,
    Verdict,
    VerdictKind,
    run_backtracking_gd,
    run_coordinatewise_backtracking_gd,
    run_coordinatewise_gdnew,
    run_gdnew,
    run_method,
    run_standard_gd,
    run_two_way_backtracking_gd,
)

__all__ = [
    "__version__",
    "DeltaSelection",
    "LineSearchParams",
    "SmoothnessModel",
    "armijo_holds",
    "backtracking_delta",
    "coordinatewise_armijo_holds",
    "coordinatewise_deltas",
    "gdnew_delta",
    "two_way_backtracking_delta",
    "DifferentiableFunction",
    "Point",
    "SeparableObjective",
    "evaluate",
    "fd_gradient_check",
    "g_second_derivative",
    "grad",
    "make_example_g",
    "make_example_g2d",
    "make_quadratic",
    "Method",
    "StoppingRule",
    "Trajectory",
    "Verdict",
    "VerdictKind",
    "run_backtracking_gd",
    "run_coordinatewise_backtracking_gd",
    "run_coordinatewise_gdnew",
    "run_gdnew",
    "run_method",
    "run_standard_gd",
    "run_two_way_backtracking_gd",
]
