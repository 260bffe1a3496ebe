"""Histogram unfolding as regularized integer least squares, with a QUBO encoding."""

from .core import (
    CapacityError,
    Histogram,
    LaplacianOperator,
    Method,
    ResponseMatrix,
    SingularResponseError,
    UnfoldResult,
    UnfoldingError,
    fold,
    fold_counts,
    laplacian,
    poisson_loglik,
)
from .datagen import DetectorModel, DistributionSpec, Kind, apply_detector, build_response, poissonize, sample_truth
from .metrics import binwise_ratio, bootstrap_errors, chi2
from .qubo import (
    BoundsVector,
    QuadraticObjective,
    QuboModel,
    build_objective,
    decode,
    encode,
    estimate_bounds,
    objective_value,
    resolve_lambda,
    select_lambda,
)
from .solvers import AnnealSchedule, SolveOutcome, solve_anneal, solve_bruteforce, solve_integer_cd
from .unfolders import IbuConfig, SvdConfig, unfold_ibu, unfold_mi, unfold_svd

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule",
    "BoundsVector",
    "CapacityError",
    "DetectorModel",
    "DistributionSpec",
    "Histogram",
    "IbuConfig",
    "Kind",
    "LaplacianOperator",
    "Method",
    "QuadraticObjective",
    "QuboModel",
    "ResponseMatrix",
    "SingularResponseError",
    "SolveOutcome",
    "SvdConfig",
    "UnfoldResult",
    "UnfoldingError",
    "apply_detector",
    "binwise_ratio",
    "bootstrap_errors",
    "build_objective",
    "build_response",
    "chi2",
    "decode",
    "encode",
    "estimate_bounds",
    "fold",
    "fold_counts",
    "laplacian",
    "objective_value",
    "poisson_loglik",
    "poissonize",
    "resolve_lambda",
    "sample_truth",
    "select_lambda",
    "solve_anneal",
    "solve_bruteforce",
    "solve_integer_cd",
    "unfold_ibu",
    "unfold_mi",
    "unfold_svd",
]
