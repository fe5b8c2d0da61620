"""Convex regression with structured column-wise sparsity.

Fits convex (optionally non-decreasing) functions to data by least squares
over max-affine representations, with lasso-style penalties on the fitted
subgradient matrix.  Penalizing the l1/l-inf mixed norm of that matrix zeroes
out whole columns, so irrelevant input variables are removed rather than
merely shrunk.  A two-stage relaxed variant decouples variable selection from
shrinkage via a second tuning parameter.
"""

__version__ = "0.1.0"

from .errors import InvalidInputError, OracleSizeError, SolverFailure
from .model import (
    ActiveSet,
    Dataset,
    MaxAffineModel,
    Standardization,
    SubgradientMatrix,
    default_zero_tau,
    l1_lq_norm,
    predict,
    support_of,
)
from .qp import QpProblem, QpSolution, SolveTolerances, kkt_residuals, oracle_solve, solve
from .estimators import (
    FAMILIES,
    FitResult,
    FitSpec,
    build_convexity_constraints,
    compute_adaptive_weights,
    fit,
    fit_cnls,
    fit_lasso1,
    fit_lasso2,
    fit_relaxed,
    fit_slasso,
    lambda_max,
)
from .selection import (
    CvReport,
    TuningGrid,
    f_score,
    k_fold_cv,
    nonzeros_count,
    prediction_error,
    test_error,
)
from .data import SyntheticConfig, SyntheticData, generate, read_csv, standardize_fit

__all__ = [
    "ActiveSet",
    "CvReport",
    "Dataset",
    "FAMILIES",
    "FitResult",
    "FitSpec",
    "InvalidInputError",
    "MaxAffineModel",
    "OracleSizeError",
    "QpProblem",
    "QpSolution",
    "SolveTolerances",
    "SolverFailure",
    "Standardization",
    "SubgradientMatrix",
    "SyntheticConfig",
    "SyntheticData",
    "TuningGrid",
    "build_convexity_constraints",
    "compute_adaptive_weights",
    "default_zero_tau",
    "f_score",
    "fit",
    "fit_cnls",
    "fit_lasso1",
    "fit_lasso2",
    "fit_relaxed",
    "fit_slasso",
    "generate",
    "k_fold_cv",
    "kkt_residuals",
    "l1_lq_norm",
    "lambda_max",
    "nonzeros_count",
    "oracle_solve",
    "predict",
    "prediction_error",
    "read_csv",
    "solve",
    "standardize_fit",
    "support_of",
    "test_error",
]
