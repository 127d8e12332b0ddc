"""Alternating mirror descent (AMD) for the RDD and fused RDD/RD problems.

Each AMD step linearizes the quadratic Gromov term at the current kernel,
takes a closed-form mirror step (a row softmax in log domain) and then
resets the output marginal to the column marginal of the new kernel.
``theta = 1`` is the pure structural problem; ``theta = 0`` reduces to the
Blahut-Arimoto iteration for the classical problem.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .distortion import (
    Coupling,
    column_marginal,
    expected_classical_distortion,
    gromov_distortion_decomposed,
)
from .spaces import DiscreteSource, MetricSpace

log = logging.getLogger(__name__)

SUPPORT_FLOOR = 1e-300
CONVERGED_DIAGNOSTIC_TOL = 1e-6


class NumericalFailure(FloatingPointError):
    """Non-finite logits in a kernel update."""

    def __init__(self, lam: float, message: str = "non-finite logits in kernel update"):
        super().__init__(f"{message} (lambda={lam!r})")
        self.lam = lam


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.0
    theta: float = 1.0
    max_iter: int = 100
    w_tol: float = 0.0
    seed: int = 0
    support_floor: bool = False
    trace: bool = False

    def __post_init__(self):
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.w_tol < 0:
            raise ValueError(f"w_tol must be >= 0, got {self.w_tol}")


@dataclass
class SolverResult:
    coupling: Coupling
    rate_nats: float
    gromov_distortion: float
    classical_distortion: float
    fused_distortion: float
    iterations_run: int
    converged: bool
    lam: float = 0.0
    theta: float = 1.0
    objective_trace: list[float] | None = field(default=None, repr=False)


def relaxed_objective(w: np.ndarray, r: np.ndarray, p: np.ndarray) -> float:
    """``sum_ij p_i w_ij (ln w_ij - ln r_j)`` with the given ``r`` (0 ln 0 = 0)."""
    joint = w * p[:, None]
    mask = joint > 0
    if np.any(mask & (r[None, :] <= 0)):
        raise ValueError("zero output marginal in a column that carries mass")
    ratio = np.where(mask, w, 1.0) / np.where(mask, r[None, :], 1.0)
    return float(np.sum(joint[mask] * np.log(ratio[mask])))


def mutual_information(coupling: Coupling | np.ndarray, p: np.ndarray) -> float:
    """I(X;Y) in nats, using the exact column marginal rather than a stored ``r``."""
    w = coupling.w if isinstance(coupling, Coupling) else np.asarray(coupling, dtype=float)
    p = np.asarray(p, dtype=float)
    value = relaxed_objective(w, column_marginal(w, p), p)
    if value < -1e-10:
        raise ValueError(f"mutual information came out negative ({value})")
    return max(value, 0.0)


class _Problem:
    """Matrices shared by every step of one solve."""

    def __init__(self, dx, dy, p, d_cross, theta):
        self.dx = np.asarray(dx, dtype=float)
        self.dy = np.asarray(dy, dtype=float)
        self.p = np.asarray(p, dtype=float)
        self.theta = theta
        self.E = self.dx * self.p[None, :]
        self.dy2 = self.dy**2
        if theta < 1.0 and d_cross is None:
            raise ValueError("d_cross is required when theta < 1")
        self.d_cross = None if d_cross is None else np.asarray(d_cross, dtype=float)
        m, n = len(self.p), self.dy.shape[0]
        if self.dx.shape != (m, m) or self.dy.shape != (n, n):
            raise ValueError("distance matrices inconsistent with p")
        if self.d_cross is not None and self.d_cross.shape != (m, n):
            raise ValueError(f"d_cross has shape {self.d_cross.shape}, expected ({m}, {n})")

    def logits(self, state: Coupling, lam: float, support_floor: bool) -> np.ndarray:
        r = state.r
        if support_floor:
            r = np.maximum(r, SUPPORT_FLOOR)
        with np.errstate(divide="ignore"):
            L = np.repeat(np.log(r)[None, :], len(self.p), axis=0)
        theta = self.theta
        if theta > 0 and lam > 0:
            w = state.w
            L += (4.0 * lam * theta) * (self.E @ w @ self.dy)
            L -= (2.0 * lam * theta) * (self.dy2 @ column_marginal(w, self.p))[None, :]
        if theta < 1 and lam > 0:
            L -= (lam * (1.0 - theta)) * self.d_cross
        return L

    def step(self, state: Coupling, lam: float, support_floor: bool = False) -> Coupling:
        L = self.logits(state, lam, support_floor)
        if np.any(np.isnan(L)) or np.any(L == np.inf) or np.any(np.max(L, axis=1) == -np.inf):
            raise NumericalFailure(lam)
        w = kernels.row_softmax(L)
        if not np.all(np.isfinite(w)):
            raise NumericalFailure(lam, "non-finite kernel after softmax")
        return Coupling(w, column_marginal(w, self.p))


def amd_step(state: Coupling, dx, dy, p, d_cross=None, config: SolverConfig | None = None) -> Coupling:
    """One kernel update followed by one marginal update."""
    config = config or SolverConfig()
    problem = _Problem(dx, dy, p, d_cross, config.theta)
    return problem.step(state, config.lam, config.support_floor)


def ba_step(state: Coupling, d_cross, p, lam: float) -> Coupling:
    """Blahut-Arimoto update ``w_ij ~ r_j exp(-lam d_ij)``, then ``r = W'p``."""
    d_cross = np.asarray(d_cross, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        L = np.log(state.r)[None, :] - lam * d_cross
    if np.any(np.isnan(L)) or np.any(L == np.inf):
        raise NumericalFailure(lam)
    w = kernels.row_softmax(L)
    return Coupling(w, column_marginal(w, p))


def _iterate(step, state, p, max_iter, w_tol, trace, objective):
    history = [] if trace else None
    change = np.inf
    early = False
    k = 0
    for k in range(1, max_iter + 1):
        new = step(state)
        change = float(np.max(np.abs(new.w - state.w)))
        state = new
        if history is not None:
            history.append(objective(state))
        if w_tol > 0 and change < w_tol:
            early = True
            break
    converged = early or change <= CONVERGED_DIAGNOSTIC_TOL
    return state, k, converged, history


def _result(state, problem, lam, theta, iters, converged, history):
    p = problem.p
    rate = mutual_information(state, p)
    gromov = gromov_distortion_decomposed(problem.dx, problem.dy, state, p).total
    gromov = max(gromov, 0.0)
    classical = 0.0
    if problem.d_cross is not None and theta < 1.0:
        classical = expected_classical_distortion(problem.d_cross, state, p)
    fused = theta * gromov + (1.0 - theta) * classical
    return SolverResult(
        coupling=state,
        rate_nats=rate,
        gromov_distortion=gromov,
        classical_distortion=classical,
        fused_distortion=fused,
        iterations_run=iters,
        converged=converged,
        lam=lam,
        theta=theta,
        objective_trace=history,
    )


def solve(
    source: DiscreteSource,
    y_space: MetricSpace,
    config: SolverConfig,
    d_cross: np.ndarray | None = None,
) -> SolverResult:
    """Run AMD from the uniform kernel for a fixed multiplier."""
    p = source.pmf
    problem = _Problem(source.space.dist_q, y_space.dist_q, p, d_cross, config.theta)
    lam = config.lam
    state = Coupling.uniform(source.space.size, y_space.size)

    def lagrangian(c):
        res = _result(c, problem, lam, config.theta, 0, False, None)
        return res.rate_nats + lam * res.fused_distortion

    state, iters, converged, history = _iterate(
        lambda s: problem.step(s, lam, config.support_floor),
        state,
        p,
        config.max_iter,
        config.w_tol,
        config.trace,
        lagrangian,
    )
    if not converged:
        log.debug("lambda=%g theta=%g: no convergence after %d iterations", lam, config.theta, iters)
    return _result(state, problem, lam, config.theta, iters, converged, history)


def ba_solve(
    source: DiscreteSource,
    d_cross: np.ndarray,
    lam: float,
    max_iter: int = 100,
    *,
    y_space: MetricSpace | None = None,
    w_tol: float = 0.0,
) -> SolverResult:
    """Classical Blahut-Arimoto at fixed multiplier, from the uniform kernel.

    ``gromov_distortion`` is reported for diagnostics when ``y_space`` is given
    and is NaN otherwise.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    p = source.pmf
    d_cross = np.asarray(d_cross, dtype=float)
    m, n = d_cross.shape
    if m != len(p):
        raise ValueError(f"d_cross has {m} rows, source has {len(p)} points")
    state = Coupling.uniform(m, n)
    state, iters, converged, _ = _iterate(
        lambda s: ba_step(s, d_cross, p, lam), state, p, max_iter, w_tol, False, None
    )
    rate = mutual_information(state, p)
    classical = expected_classical_distortion(d_cross, state, p)
    if y_space is not None:
        gromov = max(gromov_distortion_decomposed(source.space.dist_q, y_space.dist_q, state, p).total, 0.0)
    else:
        gromov = float("nan")
    return SolverResult(
        coupling=state,
        rate_nats=rate,
        gromov_distortion=gromov,
        classical_distortion=classical,
        fused_distortion=classical,
        iterations_run=iters,
        converged=converged,
        lam=lam,
        theta=0.0,
    )
