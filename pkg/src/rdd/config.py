"""Run configuration document: strict schema, flag overrides, construction helpers."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Discriminator, Field, Tag, ValidationError

from .solver import SolverConfig
from .spaces import (
    DEFAULT_MAX_POINTS,
    DiscreteSource,
    MetricSpace,
    SourceFamily,
    build_circle,
    build_sphere,
    build_uniform_grid,
    source_pmf,
)
from .sweep import SweepPlan, auto_lambda_end


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Family = Literal["gaussian", "laplacian", "uniform"]


class GridSpec(_Strict):
    shape: Literal["grid"] = "grid"
    family: Family = "gaussian"
    sigma: float = Field(1.0, gt=0)
    dim: Literal[1, 2, 3] = 1
    h: float = Field(8.0, gt=0)
    K: int = Field(50, ge=1)


class CircleSpec(_Strict):
    shape: Literal["circle"]
    family: Family = "gaussian"
    sigma: float = Field(1.0, gt=0)
    n: int = Field(20, ge=2)
    radius: float = Field(4.0, gt=0)


class SphereSpec(_Strict):
    shape: Literal["sphere"]
    family: Family = "gaussian"
    sigma: float = Field(1.0, gt=0)
    n: int = Field(20, ge=2)
    radius: float = Field(4.0, gt=0)


def _shape_of(value: Any) -> str:
    if isinstance(value, dict):
        return value.get("shape", "grid")
    return getattr(value, "shape", "grid")


SpaceSpec = Annotated[
    Union[
        Annotated[GridSpec, Tag("grid")],
        Annotated[CircleSpec, Tag("circle")],
        Annotated[SphereSpec, Tag("sphere")],
    ],
    Discriminator(_shape_of),
]

_SHAPES = ("grid", "circle", "sphere")

Theta = Annotated[float, Field(ge=0.0, le=1.0)]


class SweepSpec(_Strict):
    lambda_start: float = Field(0.0, ge=0)
    # "auto" resolves to 5 / E[d_X(X, X')^2] for the configured source
    lambda_end: Union[float, Literal["auto"]] = 50.0
    lambda_count: int = Field(100, ge=1)
    theta_values: list[Theta] = Field(default_factory=lambda: [1.0], min_length=1)


class SolverSpec(_Strict):
    max_iter: int = Field(100, ge=1)
    w_tol: float = Field(0.0, ge=0)
    seed: int = 0
    support_floor: bool = False


class DmaxSpec(_Strict):
    restarts: int = Field(16, ge=1)
    iterations: int = Field(5000, ge=1)


class OutputSpec(_Strict):
    path: str | None = None
    format: Literal["csv", "json"] = "csv"
    emit_coupling: bool = False
    audit: bool = False


class RunConfig(_Strict):
    source: SpaceSpec = Field(default_factory=GridSpec)
    y_space: SpaceSpec | None = None
    q: float = Field(2.0, ge=1)
    max_points: int = Field(DEFAULT_MAX_POINTS, ge=1)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    dmax: DmaxSpec = Field(default_factory=DmaxSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    jobs: int | None = Field(None, ge=1)


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        parts = [str(p) for p in err["loc"]]
        # drop the union tag pydantic inserts after a space key
        if len(parts) > 1 and parts[0] in ("source", "y_space") and parts[1] in _SHAPES:
            del parts[1]
        loc = ".".join(parts)
        lines.append(f"{loc or '<root>'}: {err['msg']}")
    return "\n".join(lines)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config (or start from defaults) and apply dotted-key overrides."""
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
    for dotted, value in (overrides or {}).items():
        node = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{dotted}: cannot override inside a non-object")
        node[leaf] = value
    return parse_config(data)


def build_space(spec, q: float, max_points: int) -> MetricSpace:
    if spec.shape == "grid":
        return build_uniform_grid(spec.h, spec.K, spec.dim, q, max_points=max_points)
    if spec.shape == "circle":
        space = build_circle(spec.n, spec.radius, q)
    else:
        space = build_sphere(spec.n, spec.radius, q)
    if space.size > max_points:
        raise ConfigError(f"{spec.shape} with {space.size} points exceeds max_points={max_points}")
    return space


def build_problem(config: RunConfig) -> tuple[DiscreteSource, MetricSpace]:
    x_space = build_space(config.source, config.q, config.max_points)
    family = SourceFamily(config.source.family, config.source.sigma)
    source = source_pmf(x_space, family)
    y_spec = config.y_space if config.y_space is not None else config.source
    y_space = x_space if y_spec == config.source else build_space(y_spec, config.q, config.max_points)
    return source, y_space


def sweep_plan(config: RunConfig, source: DiscreteSource) -> SweepPlan:
    s = config.sweep
    end = auto_lambda_end(source) if s.lambda_end == "auto" else s.lambda_end
    solver = SolverConfig(
        max_iter=config.solver.max_iter,
        w_tol=config.solver.w_tol,
        seed=config.solver.seed,
        support_floor=config.solver.support_floor,
    )
    return SweepPlan(s.lambda_start, end, s.lambda_count, tuple(s.theta_values), solver)
