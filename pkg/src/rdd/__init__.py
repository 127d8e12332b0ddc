"""Rate distortion-in-distortion solvers on discrete metric-measure spaces."""

from .distortion import (
    Coupling,
    DistortionBreakdown,
    compute_dmax,
    expected_classical_distortion,
    fused_distortion,
    gromov_distortion_bruteforce,
    gromov_distortion_decomposed,
)
from .kernels import BACKEND
from .solver import (
    NumericalFailure,
    SolverConfig,
    SolverResult,
    amd_step,
    ba_solve,
    ba_step,
    mutual_information,
    solve,
)
from .spaces import (
    DiscreteSource,
    MetricSpace,
    SourceFamily,
    build_circle,
    build_sphere,
    build_uniform_grid,
    cross_distance_matrix,
    source_pmf,
)

__version__ = "0.1.0"
