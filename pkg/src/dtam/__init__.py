"""Dynamic thresholding with memory (DTAM) and baseline pursuits for sparse
linear inverse problems ``y = Ax + nu`` with ``||x||_0 <= k``."""
from ._backend import BACKEND, available_backends
from .core import (
    AlgoConfig,
    DimensionError,
    IterRecord,
    PursuitTrace,
    RecoveryProblem,
    StopReason,
    neg_gradient,
    normalize_columns,
    residual,
)
from .linalg import hard_threshold, least_squares_on_support, restrict_to_support, top_k_indices
from .meanfun import Family, MeanFunctionSpec, g_gamma, select_q
from .pursuit import ALGORITHMS, dtam, get_algorithm, omp, pgrotp, run, sp, stomp
from .qp import CappedSimplexSpec, QpSolution, SumMode, project_capped_simplex, solve_w_subproblem

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "AlgoConfig", "BACKEND", "CappedSimplexSpec", "DimensionError", "Family",
    "IterRecord", "MeanFunctionSpec", "PursuitTrace", "QpSolution", "RecoveryProblem",
    "StopReason", "SumMode", "available_backends", "dtam", "g_gamma", "get_algorithm",
    "hard_threshold", "least_squares_on_support", "neg_gradient", "normalize_columns", "omp",
    "pgrotp", "project_capped_simplex", "residual", "restrict_to_support", "run",
    "select_q", "solve_w_subproblem", "sp", "stomp", "top_k_indices",
]
