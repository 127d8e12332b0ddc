"""Rate-distortion curves over lambda grids and R(D; theta) surfaces over (theta, lambda) grids."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .distortion import Coupling, dmax_quadratic, fused_distortion
from .solver import NumericalFailure, SolverConfig, SolverResult, ba_solve, solve
from .spaces import DiscreteSource, MetricSpace

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
AUTO_LAMBDA_SCALE = 5.0


@dataclass(frozen=True)
class SweepPlan:
    lambda_start: float = 0.0
    lambda_end: float = 50.0
    lambda_count: int = 100
    theta_values: tuple[float, ...] = (1.0,)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        object.__setattr__(self, "theta_values", tuple(float(t) for t in self.theta_values))
        if self.lambda_count < 1:
            raise ValueError(f"lambda_count must be >= 1, got {self.lambda_count}")
        if self.lambda_start < 0:
            raise ValueError(f"lambda_start must be >= 0, got {self.lambda_start}")
        if not self.lambda_end > self.lambda_start:
            raise ValueError(
                f"lambda_end ({self.lambda_end}) must exceed lambda_start ({self.lambda_start})"
            )
        if not self.theta_values:
            raise ValueError("theta_values must be nonempty")
        for t in self.theta_values:
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"theta values must lie in [0, 1], got {t}")


def auto_lambda_end(source: DiscreteSource, scale: float = AUTO_LAMBDA_SCALE) -> float:
    """``scale / E[d_X(X, X')^2]``: the end of a lambda range in AMD's stable regime.

    With unit mirror steps AMD jumps between hard assignments once lambda times
    the distortion scale is large, and the traced curve stops being monotone.
    """
    c1, _ = dmax_quadratic(source.space.dist_q, np.zeros((1, 1)), source.pmf)
    return scale / c1 if c1 > 0 else 1.0


def lambda_grid(plan: SweepPlan) -> list[float]:
    """``start + k (end - start) / (count - 1)`` for ``k = 0 .. count - 1``."""
    if plan.lambda_count == 1:
        return [float(plan.lambda_start)]
    step = (plan.lambda_end - plan.lambda_start) / (plan.lambda_count - 1)
    return [plan.lambda_start + k * step for k in range(plan.lambda_count)]


@dataclass
class CurvePoint:
    lam: float
    theta: float
    distortion: float
    rate_nats: float
    iterations_run: int
    converged: bool
    error: str | None = None
    coupling: Coupling | None = field(default=None, repr=False)

    @property
    def rate_bits(self) -> float:
        return self.rate_nats / LN2

    @property
    def failed(self) -> bool:
        return self.error is not None


def _point(result: SolverResult, theta: float, keep_coupling: bool) -> CurvePoint:
    if theta == 1.0:
        distortion = result.gromov_distortion
    elif theta == 0.0:
        distortion = result.classical_distortion
    else:
        distortion = result.fused_distortion
    return CurvePoint(
        lam=result.lam,
        theta=theta,
        distortion=distortion,
        rate_nats=result.rate_nats,
        iterations_run=result.iterations_run,
        converged=result.converged,
        coupling=result.coupling if keep_coupling else None,
    )


def _failed_point(lam, theta, exc) -> CurvePoint:
    return CurvePoint(lam, theta, math.nan, math.nan, 0, False, error=str(exc))


def _run(tasks, jobs):
    if jobs is None or jobs <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    # executor.map restores submission order
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda t: t(), tasks))


def _solve_task(source, y_space, config, d_cross, method, keep_coupling):
    def task():
        try:
            if method == "ba":
                result = ba_solve(source, d_cross, config.lam, config.max_iter, y_space=y_space, w_tol=config.w_tol)
            else:
                result = solve(source, y_space, config, d_cross)
        except (NumericalFailure, FloatingPointError) as exc:
            log.warning("point lambda=%g theta=%g failed: %s", config.lam, config.theta, exc)
            return _failed_point(config.lam, config.theta, exc)
        return _point(result, config.theta, keep_coupling)

    return task


def _check_method(method, theta):
    if method not in ("amd", "ba"):
        raise ValueError(f"unknown method {method!r}")
    if method == "ba" and theta != 0.0:
        raise ValueError("the Blahut-Arimoto path only applies to theta = 0")


def trace_curve(
    source: DiscreteSource,
    y_space: MetricSpace,
    plan: SweepPlan,
    d_cross: np.ndarray | None = None,
    *,
    method: str = "amd",
    jobs: int | None = None,
    keep_couplings: bool = False,
) -> list[CurvePoint]:
    """One independently solved point per lambda, each from the uniform kernel."""
    if len(plan.theta_values) != 1:
        raise ValueError("trace_curve takes exactly one theta; use trace_surface for several")
    theta = plan.theta_values[0]
    _check_method(method, theta)
    if theta < 1.0 and d_cross is None:
        raise ValueError("d_cross is required when theta < 1")
    tasks = [
        _solve_task(source, y_space, replace(plan.solver, lam=lam, theta=theta), d_cross, method, keep_couplings)
        for lam in lambda_grid(plan)
    ]
    return _run(tasks, jobs)


def trace_surface(
    source: DiscreteSource,
    y_space: MetricSpace,
    plan: SweepPlan,
    d_cross: np.ndarray,
    *,
    jobs: int | None = None,
    keep_couplings: bool = False,
) -> list[CurvePoint]:
    """Cartesian (theta, lambda) grid, ordered by theta then lambda."""
    if d_cross is None and any(t < 1.0 for t in plan.theta_values):
        raise ValueError("d_cross is required when any theta < 1")
    tasks = [
        _solve_task(source, y_space, replace(plan.solver, lam=lam, theta=theta), d_cross, "amd", keep_couplings)
        for theta in plan.theta_values
        for lam in lambda_grid(plan)
    ]
    return _run(tasks, jobs)


def failures(points: list[CurvePoint]) -> list[CurvePoint]:
    return [pt for pt in points if pt.failed]


def lower_envelope(points: list[CurvePoint]) -> list[tuple[float, float]]:
    """``(distortion, rate)`` pairs of the lower monotone envelope, by increasing distortion."""
    pairs = sorted((pt.distortion, pt.rate_nats) for pt in points if not pt.failed)
    out = []
    best = math.inf
    for d, r in pairs:
        best = min(best, r)
        out.append((d, best))
    return out


def max_rate_increase(points: list[CurvePoint]) -> float:
    """Largest rise in rate between neighbours once points are sorted by distortion.

    A non-positive value means the raw curve is monotone non-increasing.
    """
    pairs = sorted((pt.distortion, pt.rate_nats) for pt in points if not pt.failed)
    if len(pairs) < 2:
        return 0.0
    rates = np.array([r for _, r in pairs])
    return float(np.max(np.diff(rates)))


def rate_at_distortion(points: list[CurvePoint], target: float) -> float:
    """Linear interpolation of the raw curve, sorted by distortion, at ``target``.

    NaN when ``target`` lies outside the traced distortion range.
    """
    pairs = sorted((pt.distortion, pt.rate_nats) for pt in points if not pt.failed)
    if not pairs:
        return math.nan
    ds = np.array([d for d, _ in pairs])
    rs = np.array([r for _, r in pairs])
    if target < ds[0] or target > ds[-1]:
        return math.nan
    return float(np.interp(target, ds, rs))


def audit(points, source, y_space, d_cross=None, tol=1e-10) -> list[str]:
    """Recompute each retained coupling's distortion; return mismatch descriptions."""
    problems = []
    for k, pt in enumerate(points):
        if pt.failed or pt.coupling is None:
            continue
        if pt.theta == 1.0:
            value = fused_distortion(source.space.dist_q, y_space.dist_q, None, pt.coupling, source.pmf, 1.0)
            value = max(value, 0.0)
        else:
            value = fused_distortion(source.space.dist_q, y_space.dist_q, d_cross, pt.coupling, source.pmf, pt.theta)
        if abs(value - pt.distortion) > tol * max(1.0, abs(value)):
            problems.append(f"point {k}: recorded {pt.distortion!r}, recomputed {value!r}")
    return problems
