"""Block Bregman proximal gradient solvers with two-reference closed-form
updates, instantiated on nonnegative matrix factorization."""

from .bregman import (
    ReferenceFunction,
    StepSizeBound,
    bregman_distance,
    bregman_step,
    optimal_stepsize,
    relative_smoothness_check,
    symmetric_coefficient_estimate,
)
from .core import (
    BlockedIterate,
    BlockPartition,
    BlockProblem,
    ConfigError,
    DescentViolationError,
    InvalidBlockError,
    InvalidReferenceError,
    LineSearchError,
    SparseMatrix,
    frobenius_norm,
    orthogonal_project_nonneg,
    residual_update,
)
from .estimator import BregmanNMF, NotFittedError
from .harness import (
    ExperimentConfig,
    ResultsSummary,
    SyntheticSpec,
    check_invariants,
    generate_synthetic,
    run_experiment,
)
from .metrics import (
    OptimalityReport,
    generalized_gradient,
    optimality_report,
    projected_gradient,
    relative_residual,
    stationarity_equivalence_check,
)
from .mmio import MatrixMarketError, load_matrix, save_dense, save_sparse
from .nmf import (
    NmfProblem,
    NmfState,
    SparseNmfState,
    nmf_block_update,
    nmf_full_projected_gradient,
    nmf_valid_blocks,
)
from .problems import LeastSquaresProblem, SeparableQuadratic
from .solvers import (
    ALGORITHMS,
    BlockSchedule,
    RunTrace,
    SearchDirection,
    SolverConfig,
    StepPolicy,
    armijo_line_search,
    b2b_step,
    bpg_step,
    cbbcd_sweep,
    greedy_select,
    pg_step,
    run,
    valid_coordinates,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "BlockPartition",
    "BlockProblem",
    "BlockSchedule",
    "BlockedIterate",
    "BregmanNMF",
    "ConfigError",
    "DescentViolationError",
    "ExperimentConfig",
    "InvalidBlockError",
    "InvalidReferenceError",
    "LeastSquaresProblem",
    "LineSearchError",
    "MatrixMarketError",
    "NmfProblem",
    "NmfState",
    "NotFittedError",
    "OptimalityReport",
    "ReferenceFunction",
    "ResultsSummary",
    "RunTrace",
    "SearchDirection",
    "SeparableQuadratic",
    "SolverConfig",
    "SparseMatrix",
    "SparseNmfState",
    "StepPolicy",
    "StepSizeBound",
    "SyntheticSpec",
    "armijo_line_search",
    "b2b_step",
    "bpg_step",
    "bregman_distance",
    "bregman_step",
    "cbbcd_sweep",
    "check_invariants",
    "frobenius_norm",
    "generalized_gradient",
    "generate_synthetic",
    "greedy_select",
    "load_matrix",
    "nmf_block_update",
    "nmf_full_projected_gradient",
    "nmf_valid_blocks",
    "optimal_stepsize",
    "optimality_report",
    "orthogonal_project_nonneg",
    "pg_step",
    "projected_gradient",
    "relative_residual",
    "relative_smoothness_check",
    "residual_update",
    "run",
    "run_experiment",
    "save_dense",
    "save_sparse",
    "stationarity_equivalence_check",
    "symmetric_coefficient_estimate",
    "valid_coordinates",
]
