"""Experiment configuration: TOML documents validated with pydantic.

Top-level keys hold the run settings and line-search parameters; the
``[objective]``, ``[stopping]``, ``[model]`` and ``[experiment]`` tables hold
the rest. Unknown keys are rejected and every validation problem is
reported, not just the first.
"""

from __future__ import annotations

import math
import sys
from typing import Literal, Optional

import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .linesearch import LineSearchParams
from .objective import OBJECTIVES
from .optimizers import Method, StoppingRule

KINDS = ("single", "sweep", "remark-check", "basin", "claim6", "invariants")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]) -> None:
        super().__init__("\n".join(errors))
        self.errors = errors


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ObjectiveSection(_Section):
    name: Literal[OBJECTIVES] = "quadratic"  # type: ignore[valid-type]
    lambdas: Optional[list[float]] = None
    lambdas2: Optional[list[float]] = None
    z0: Optional[list[float]] = None


class StoppingSection(_Section):
    max_iterations: int = Field(100_000, gt=0)
    gradient_tolerance: float = Field(1e-8, gt=0)
    divergence_radius: float = Field(1e8, gt=0)
    stall_step_tolerance: float = Field(0.0, ge=0)

    def rule(self) -> StoppingRule:
        return StoppingRule(**self.model_dump())


class ModelSection(_Section):
    shrink: float = Field(0.5, gt=0, lt=1)
    L0: Optional[float] = Field(None, gt=0)


class ExperimentSection(_Section):
    sample_count: int = Field(100, ge=1)
    init_box: list[list[float]] = [[-1.0, 1.0], [-1.0, 1.0]]
    randomize: float = Field(0.1, ge=0, lt=1)
    hessian_step: float = Field(1e-4, gt=0)
    hessian_tol: float = Field(1e-4, gt=0)

    @field_validator("init_box")
    @classmethod
    def _box(cls, box: list[list[float]]) -> list[list[float]]:
        for side in box:
            if len(side) != 2 or not all(math.isfinite(v) for v in side) or not side[0] < side[1]:
                raise ValueError("init_box entries must be bounded [low, high] pairs with low < high")
        return box


class ExperimentConfig(_Section):
    kind: Literal[KINDS] = "single"  # type: ignore[valid-type]
    method: Optional[Method] = None
    alpha: float = 0.5
    beta: float = 0.5
    delta0: float = 1.0
    seed: int = 0
    output_dir: str = "out"
    format: Literal["csv", "json-lines"] = "csv"
    stride: int = Field(1, ge=1)
    workers: Optional[int] = Field(None, ge=1)
    objective: ObjectiveSection = ObjectiveSection()
    stopping: StoppingSection = StoppingSection()
    model: ModelSection = ModelSection()
    experiment: ExperimentSection = ExperimentSection()

    @field_validator("alpha", "beta")
    @classmethod
    def _unit(cls, v: float, info) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(f"{info.field_name} must lie in (0,1)")
        return v

    @field_validator("delta0")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not (v > 0 and math.isfinite(v)):
            raise ValueError("delta0 must be positive")
        return v

    @model_validator(mode="after")
    def _cross(self) -> "ExperimentConfig":
        problems = []
        spread = self.experiment.randomize
        if self.kind in ("basin", "claim6") and spread > 0:
            if self.alpha * (1 + spread) >= 1 or self.beta * (1 + spread) >= 1:
                problems.append("experiment.randomize: perturbed alpha/beta would leave (0,1)")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def params(self) -> LineSearchParams:
        return LineSearchParams(self.alpha, self.beta, self.delta0)


def _format_errors(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        msg = err["msg"].removeprefix("Value error, ")
        if err["type"] == "missing":
            msg = "field required"
        if err["type"] == "value_error" and not loc:
            out.extend(msg.split("; "))
        else:
            out.append(f"{loc}: {msg}" if loc else msg)
    return out


def _required_by_kind(data: dict) -> list[str]:
    kind = data.get("kind", "single")
    out = []
    if kind in ("single", "sweep", "basin") and data.get("method") is None:
        out.append(f"method: field required for kind '{kind}'")
    objective = data.get("objective")
    if kind == "single" and (not isinstance(objective, dict) or objective.get("z0") is None):
        out.append("objective.z0: field required for kind 'single'")
    return out


def config_from_dict(data: dict) -> ExperimentConfig:
    errors = _required_by_kind(data)
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        errors.extend(_format_errors(exc))
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML configuration document."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"parse error: {exc}"]) from None
    return config_from_dict(data)


def serialize_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.model_dump(mode="json", exclude_none=True))
