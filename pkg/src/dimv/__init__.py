"""Missing-data imputation with DPER covariance estimation and DIMV conditional means."""

from .core import (
    MaskedMatrix,
    MissingPattern,
    Standardizer,
    apply_standardizer,
    build_masked,
    fit_standardizer,
    invert_standardizer,
    pattern_of,
)
from .dper import PairStats, case_deletion_cov, dper_fit, eta, pair_stats, solve_sigma12
from .errors import (
    DimvError,
    DomainError,
    EstimationError,
    SelectionError,
    SingularityError,
    TuningError,
    ValidationError,
)
from .evaluation import complete_case_cov, mean_impute, rmse_masked, run_benchmark
from .imputer import (
    ImputationConfig,
    ImputationResult,
    coefficients,
    conditional_covariance,
    conditional_ridge_mean,
    confidence_region,
    correlation,
    fit_model,
    impute,
    redundant_feature_delta,
    select_features,
)
from .missing import MaskSpec, mcar_mask, monotone_corner_mask
from .tuner import AlphaGrid, tune_alpha

__version__ = "0.1.0"
