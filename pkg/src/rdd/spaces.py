"""Discrete metric-measure spaces: uniform grids, circles, spheres, and source pmfs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

DEFAULT_MAX_POINTS = 10_000
FAMILIES = ("gaussian", "laplacian", "uniform")


class PointCapError(ValueError):
    """Raised when a construction would exceed the point-count safety cap."""


class DimensionMismatchError(ValueError):
    """Raised when two spaces of different ambient dimension are compared pointwise."""


class DegenerateSourceError(ValueError):
    """Raised when a source density has no representable mass."""


def _pairwise_qdist(points: np.ndarray, q: float) -> np.ndarray:
    if len(points) == 1:
        return np.zeros((1, 1))
    if q == 2:
        # squared distances directly; avoids sqrt followed by squaring
        return squareform(pdist(points, "sqeuclidean"))
    return squareform(pdist(points, "euclidean") ** q)


@dataclass(frozen=True)
class MetricSpace:
    """A finite point set with its matrix of q-th power Euclidean distances."""

    points: np.ndarray
    q: float = 2.0
    dist_q: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a nonempty (n, dim) array")
        if self.q < 1:
            raise ValueError(f"distance exponent q must be >= 1, got {self.q}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        dist = self.dist_q
        if dist is None:
            dist = _pairwise_qdist(pts, float(self.q))
        else:
            dist = np.array(dist, dtype=float)
            validate_metric_matrix(dist, len(pts))
        dist.setflags(write=False)
        object.__setattr__(self, "dist_q", dist)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.size


def validate_metric_matrix(d: np.ndarray, n: int | None = None, name: str = "distance matrix") -> None:
    """Raise ValueError unless ``d`` is square, symmetric, nonnegative with zero diagonal."""
    d = np.asarray(d)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"{name} must be square, got shape {d.shape}")
    if n is not None and d.shape[0] != n:
        raise ValueError(f"{name} has side {d.shape[0]}, expected {n}")
    if not np.all(np.isfinite(d)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(np.diag(d) != 0):
        raise ValueError(f"{name} has a nonzero diagonal")
    if np.any(d < 0):
        raise ValueError(f"{name} has negative entries")
    if not np.array_equal(d, d.T):
        raise ValueError(f"{name} is not symmetric")


def grid_coordinates(h: float, K: int) -> np.ndarray:
    """Cell midpoints of ``K`` equal cells partitioning [-h, h]."""
    delta = 2.0 * h / K
    return -h + delta / 2 + np.arange(K) * delta


def build_uniform_grid(
    h: float, K: int, dim: int = 1, q: float = 2.0, max_points: int = DEFAULT_MAX_POINTS
) -> MetricSpace:
    """Cartesian-product grid of ``K**dim`` cell midpoints on [-h, h]^dim."""
    if dim not in (1, 2, 3):
        raise ValueError(f"grid dimension must be 1, 2 or 3, got {dim}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if h <= 0:
        raise ValueError(f"h must be > 0, got {h}")
    count = K**dim
    if count > max_points:
        raise PointCapError(f"grid with K={K}, dim={dim} has {count} points (cap {max_points})")
    axis = grid_coordinates(h, K)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    return MetricSpace(points, q)


def build_circle(n: int, radius: float = 1.0, q: float = 2.0) -> MetricSpace:
    """``n`` equally spaced points on a circle; distances are chordal."""
    if n < 2:
        raise ValueError(f"circle needs n >= 2 points, got {n}")
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    angle = 2 * np.pi * np.arange(n) / n
    points = radius * np.stack([np.cos(angle), np.sin(angle)], axis=1)
    return MetricSpace(points, q)


def build_sphere(n_per_axis: int, radius: float = 1.0, q: float = 2.0) -> MetricSpace:
    """Longitude/colatitude mesh with ``n_per_axis**2`` points on a sphere.

    Colatitudes sit at half steps, pi*(b + 0.5)/n, so no point lands on a pole
    and all points are distinct.
    """
    if n_per_axis < 2:
        raise ValueError(f"sphere needs n_per_axis >= 2, got {n_per_axis}")
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    n = n_per_axis
    lon = 2 * np.pi * np.arange(n) / n
    colat = np.pi * (np.arange(n) + 0.5) / n
    phi, theta = np.meshgrid(lon, colat, indexing="ij")
    phi, theta = phi.ravel(), theta.ravel()
    points = radius * np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1
    )
    return MetricSpace(points, q)


@dataclass(frozen=True)
class SourceFamily:
    family: Literal["gaussian", "laplacian", "uniform"] = "gaussian"
    sigma: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown source family {self.family!r}; expected one of {FAMILIES}")
        if self.family != "uniform" and not self.sigma > 0:
            raise ValueError(f"sigma must be > 0 for {self.family} sources, got {self.sigma}")

    def log_density(self, points: np.ndarray) -> np.ndarray:
        """Unnormalized log density at each point (constant prefactors dropped)."""
        points = np.asarray(points, dtype=float)
        if self.family == "gaussian":
            return -np.sum(points**2, axis=1) / (2 * self.sigma**2)
        if self.family == "laplacian":
            return -np.sum(np.abs(points), axis=1) / self.sigma
        return np.zeros(len(points))


@dataclass(frozen=True)
class DiscreteSource:
    space: MetricSpace
    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.array(self.pmf, dtype=float)
        if pmf.shape != (self.space.size,):
            raise ValueError(f"pmf has shape {pmf.shape}, expected ({self.space.size},)")
        if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > 1e-12:
            raise ValueError("pmf must be nonnegative and sum to 1")
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)


def normalize_log_density(log_density: np.ndarray) -> np.ndarray:
    log_density = np.asarray(log_density, dtype=float)
    top = np.max(log_density)
    if not np.isfinite(top):
        raise DegenerateSourceError("source density has no finite mass")
    mass = np.exp(log_density - top)
    total = mass.sum()
    if total == 0 or not np.isfinite(total):
        raise DegenerateSourceError("source density underflowed to zero")
    return mass / total


def source_pmf(space: MetricSpace, family: SourceFamily) -> DiscreteSource:
    """Evaluate the family's density on the space's points and normalize."""
    return DiscreteSource(space, normalize_log_density(family.log_density(space.points)))


def cross_distance_matrix(x_space: MetricSpace, y_space: MetricSpace) -> np.ndarray:
    """Squared-error distortion ``|x_i - y_j|^2`` between two spaces of equal dimension."""
    if x_space.dim != y_space.dim:
        raise DimensionMismatchError(
            f"cross distortion needs equal dimensions, got {x_space.dim} and {y_space.dim}"
        )
    return cdist(x_space.points, y_space.points, "sqeuclidean")
