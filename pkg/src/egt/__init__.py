"""Factored orthogonal transforms: greedy approximation of orthonormal
matrices by short products of extended Givens transforms, fast projection
through the factored form, and the error analysis that goes with it."""

__version__ = "0.1.0"

from .analysis import (
    ErrorReport,
    error_report,
    error_spectrum,
    frobenius_bound,
    frobenius_bound_half_budget,
    off_norm,
    operator_norm_bound,
)
from .backend import BACKEND, backend_name
from .errors import (
    ConvergenceError,
    DomainError,
    EgtError,
    ShapeError,
    ValidationError,
)
from .factorizer import SIGMA_RULES, FactorizerConfig, GivensProduct, factorize
from .fastapply import (
    ApplyPlan,
    count_stages,
    dense_operator,
    load_product,
    load_product_json,
    plan,
    project,
    project_batch,
    reconstruct,
    save_product,
    save_product_json,
)
from .givens2x2 import (
    REFLECTOR,
    ROTATION,
    Block2,
    ExtendedGivens,
    apply_left,
    optimal_transform,
    score,
    svd2x2,
)
from .matcore import (
    DenseMatrix,
    DiagonalWeights,
    Rng,
    derive_seed,
    haar_orthogonal,
    matmul,
    orthonormal_residual,
    svd_dense,
)
from .pca import (
    Dataset,
    PcaModel,
    blob_dataset,
    digits8x8_dataset,
    fit_pca,
    knn_classify,
    run_experiment,
    train_fast_projection,
)

__all__ = [
    "ApplyPlan",
    "BACKEND",
    "Block2",
    "ConvergenceError",
    "Dataset",
    "DenseMatrix",
    "DiagonalWeights",
    "DomainError",
    "EgtError",
    "ErrorReport",
    "ExtendedGivens",
    "FactorizerConfig",
    "GivensProduct",
    "PcaModel",
    "REFLECTOR",
    "ROTATION",
    "Rng",
    "SIGMA_RULES",
    "ShapeError",
    "ValidationError",
    "apply_left",
    "backend_name",
    "blob_dataset",
    "count_stages",
    "dense_operator",
    "derive_seed",
    "digits8x8_dataset",
    "error_report",
    "error_spectrum",
    "factorize",
    "fit_pca",
    "frobenius_bound",
    "frobenius_bound_half_budget",
    "haar_orthogonal",
    "knn_classify",
    "load_product",
    "load_product_json",
    "matmul",
    "off_norm",
    "operator_norm_bound",
    "optimal_transform",
    "orthonormal_residual",
    "plan",
    "project",
    "project_batch",
    "reconstruct",
    "run_experiment",
    "save_product",
    "save_product_json",
    "score",
    "svd2x2",
    "svd_dense",
    "train_fast_projection",
]
