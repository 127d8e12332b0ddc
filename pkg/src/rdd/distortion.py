"""Gromov-type, classical and fused distortion of a conditional kernel, plus D_max."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

BRUTEFORCE_CAP = 256


@dataclass
class Coupling:
    """Row-stochastic conditional kernel ``w[i, j] = P(y_j | x_i)`` with output marginal ``r``."""

    w: np.ndarray
    r: np.ndarray

    @classmethod
    def uniform(cls, m: int, n: int) -> "Coupling":
        return cls(np.full((m, n), 1.0 / n), np.full(n, 1.0 / n))

    @classmethod
    def from_kernel(cls, w: np.ndarray, p: np.ndarray) -> "Coupling":
        w = np.asarray(w, dtype=float)
        return cls(w, column_marginal(w, p))

    @property
    def shape(self) -> tuple[int, int]:
        return self.w.shape

    def validate(self, tol: float = 1e-10) -> None:
        w, r = self.w, self.r
        if w.ndim != 2 or r.shape != (w.shape[1],):
            raise ValueError(f"coupling shapes inconsistent: w {w.shape}, r {r.shape}")
        if np.any(w < 0) or np.any(r < 0):
            raise ValueError("coupling has negative entries")
        if np.max(np.abs(w.sum(axis=1) - 1.0)) > tol:
            raise ValueError("coupling rows do not sum to 1")
        if abs(r.sum() - 1.0) > tol:
            raise ValueError("coupling marginal does not sum to 1")


def column_marginal(w: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Output marginal ``r_j = sum_i w_ij p_i``."""
    return w.T @ p


@dataclass(frozen=True)
class DistortionBreakdown:
    c1: float
    c2: float
    cross: float

    @property
    def total(self) -> float:
        return self.c1 + self.c2 - 2.0 * self.cross


def _check_shapes(dx, dy, w, p):
    m, n = w.shape
    if dx.shape != (m, m):
        raise ValueError(f"dx has shape {dx.shape}, expected ({m}, {m})")
    if dy.shape != (n, n):
        raise ValueError(f"dy has shape {dy.shape}, expected ({n}, {n})")
    if p.shape != (m,):
        raise ValueError(f"p has shape {p.shape}, expected ({m},)")


def _as_w(coupling) -> np.ndarray:
    return np.asarray(coupling.w if isinstance(coupling, Coupling) else coupling, dtype=float)


def gromov_distortion_bruteforce(dx, dy, coupling, p, *, cap: int = BRUTEFORCE_CAP) -> float:
    """Quadruple sum over (i, i', j, j'); O(M^2 N^2), for testing only."""
    dx, dy, p = (np.asarray(a, dtype=float) for a in (dx, dy, p))
    w = _as_w(coupling)
    _check_shapes(dx, dy, w, p)
    m, n = w.shape
    if m * n > cap:
        raise ValueError(f"brute-force oracle refused: M*N = {m * n} exceeds cap {cap}")
    return float(kernels.gromov_quartic(dx, dy, w, p))


def gromov_distortion_decomposed(dx, dy, coupling, p) -> DistortionBreakdown:
    """Constant + marginal-quadratic - 2 * cross term decomposition, O(M^2 N + M N^2)."""
    dx, dy, p = (np.asarray(a, dtype=float) for a in (dx, dy, p))
    w = _as_w(coupling)
    _check_shapes(dx, dy, w, p)
    c1 = p @ (dx**2) @ p
    s = column_marginal(w, p)
    c2 = s @ (dy**2) @ s
    C = dx * np.outer(p, p)
    cross = np.sum((C @ w @ dy) * w)
    return DistortionBreakdown(float(c1), float(c2), float(cross))


def expected_classical_distortion(d_cross, coupling, p) -> float:
    d_cross = np.asarray(d_cross, dtype=float)
    w = _as_w(coupling)
    p = np.asarray(p, dtype=float)
    if d_cross.shape != w.shape or p.shape != (w.shape[0],):
        raise ValueError(f"shape mismatch: d_cross {d_cross.shape}, w {w.shape}, p {p.shape}")
    return float(np.sum(d_cross * w * p[:, None]))


def fused_distortion(dx, dy, d_cross, coupling, p, theta: float) -> float:
    """``theta * gromov + (1 - theta) * classical``."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    gromov = gromov_distortion_decomposed(dx, dy, coupling, p).total if theta > 0 else 0.0
    if theta == 1.0:
        return gromov
    if d_cross is None:
        raise ValueError("d_cross is required when theta < 1")
    return theta * gromov + (1.0 - theta) * expected_classical_distortion(d_cross, coupling, p)


# --------------------------------------------------------------------------
# D_max: best product coupling
# --------------------------------------------------------------------------


def dmax_quadratic(dx, dy, p) -> tuple[float, np.ndarray]:
    """Return ``(c1, Q)`` with product-coupling distortion ``c1 + r' Q r`` on the simplex."""
    dx, dy, p = (np.asarray(a, dtype=float) for a in (dx, dy, p))
    c1 = float(p @ (dx**2) @ p)
    mean_dx = float(p @ dx @ p)
    return c1, dy**2 - 2.0 * mean_dx * dy


@dataclass(frozen=True)
class DmaxDiagnostics:
    restart_values: tuple[float, ...]
    best_restart: int
    vertex_value: float
    iterations: int


def _face_polish(Q, r):
    # stationary point of r'Qr on the face spanned by the support of r
    support = np.flatnonzero(r > 1e-9)
    k = len(support)
    if k < 2:
        return None
    A = np.zeros((k + 1, k + 1))
    A[:k, :k] = 2.0 * Q[np.ix_(support, support)]
    A[:k, k] = 1.0
    A[k, :k] = 1.0
    b = np.zeros(k + 1)
    b[k] = 1.0
    try:
        sol = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)) or np.any(sol[:k] < 0):
        return None
    out = np.zeros_like(r)
    out[support] = sol[:k]
    return out


def compute_dmax(
    dx,
    dy,
    p,
    restarts: int = 16,
    *,
    iterations: int = 5000,
    seed: int = 0,
    return_diagnostics: bool = False,
):
    """Minimum Gromov-type distortion over product couplings.

    Minimizes ``c1 + r' Q r`` over the simplex by multiplicative mirror descent
    from one uniform start and ``restarts - 1`` Dirichlet starts, each finished
    by pairwise mass exchange to a KKT point.  The best vertex and the best
    two-point split are also tried.  Q may be indefinite, so the result is the
    best value found, not a certified minimum.
    Returns ``(value, r)`` or ``(value, r, diagnostics)``.
    """
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    dx, dy, p = (np.asarray(a, dtype=float) for a in (dx, dy, p))
    if dx.shape != (len(p), len(p)) or dy.ndim != 2 or dy.shape[0] != dy.shape[1]:
        raise ValueError("dmax: inconsistent shapes")
    c1, Q = dmax_quadratic(dx, dy, p)
    n = Q.shape[0]

    def value(r):
        return c1 + float(r @ Q @ r)

    # every vertex is a feasible product coupling
    vertex = int(np.argmin(np.diag(Q)))
    best_r = np.zeros(n)
    best_r[vertex] = 1.0
    vertex_value = value(best_r)
    best = vertex_value
    best_restart = -1
    if n == 1:
        diag = DmaxDiagnostics((best,), best_restart, vertex_value, 0)
        return (best, best_r, diag) if return_diagnostics else (best, best_r)

    scale = np.max(np.abs(Q))
    step = 1.0 / (2.0 * scale) if scale > 0 else 1.0
    tol = 1e-13 * max(scale, 1.0)
    max_steps = 200 * n + 1000

    def refine(r):
        r = kernels.simplex_pairwise(Q, r, tol, max_steps)
        candidates = [r]
        polished = _face_polish(Q, r)
        if polished is not None:
            candidates.append(polished)
        return min(((value(c), c) for c in candidates), key=lambda t: t[0])

    # best two-point split: with a zero diagonal the optimum on an edge is t = 1/2
    off = Q + np.diag(np.full(n, np.inf))
    a, b = np.unravel_index(np.argmin(off), off.shape)
    pair = np.zeros(n)
    pair[[a, b]] = 0.5
    pair_value, pair_r = refine(pair)
    if pair_value < best:
        best, best_r = pair_value, pair_r

    rng = np.random.default_rng(seed)
    restart_values = []
    for k in range(restarts):
        r0 = np.full(n, 1.0 / n) if k == 0 else rng.dirichlet(np.ones(n))
        val, r = refine(kernels.simplex_md(Q, r0, step, iterations))
        restart_values.append(val)
        if val < best:
            best, best_r, best_restart = val, r, k
    diag = DmaxDiagnostics(tuple(restart_values), best_restart, vertex_value, iterations)
    return (best, best_r, diag) if return_diagnostics else (best, best_r)

