"""Greedy bandwidth and variable selection for sparse nonparametric
regression via local smoothing."""

from .dataset import Dataset, load_dataset, save_dataset
from .engines import (
    BandwidthState,
    ConfigError,
    FitFailure,
    GlobalRodeoResult,
    GlobalStat,
    GreedyResult,
    RodeoConfig,
    RodeoResult,
    SigmaSpec,
    TraceRecord,
    default_parameters,
    linear_prefit,
    pseudo_covariates,
    rodeo_global,
    rodeo_greedy,
    rodeo_hard,
    rodeo_soft,
)
from .estimators import RodeoFeatureSelector, RodeoRegressor
from .gradients import (
    bandwidth_gradient,
    gradient_sd,
    gradient_weight_vector,
    log_kernel_derivative_diag,
    threshold_hard,
    threshold_modified,
)
from .kernels import EPANECHNIKOV, GAUSSIAN, KernelSpec, kernel_by_name, kernel_value
from .noise import PairSet, default_pair_count, nearest_pairs, sigma_median, sigma_rice
from .smoother import (
    FitError,
    FitResult,
    InsufficientSupport,
    SingularNormalMatrix,
    local_linear_fit,
    weight_vector,
)

__version__ = "0.1.0"

__all__ = [
    "BandwidthState",
    "ConfigError",
    "Dataset",
    "EPANECHNIKOV",
    "FitError",
    "FitFailure",
    "FitResult",
    "GAUSSIAN",
    "GlobalRodeoResult",
    "GlobalStat",
    "GreedyResult",
    "InsufficientSupport",
    "KernelSpec",
    "PairSet",
    "RodeoConfig",
    "RodeoFeatureSelector",
    "RodeoRegressor",
    "RodeoResult",
    "SigmaSpec",
    "SingularNormalMatrix",
    "TraceRecord",
    "bandwidth_gradient",
    "default_pair_count",
    "default_parameters",
    "gradient_sd",
    "gradient_weight_vector",
    "kernel_by_name",
    "kernel_value",
    "linear_prefit",
    "load_dataset",
    "local_linear_fit",
    "log_kernel_derivative_diag",
    "nearest_pairs",
    "pseudo_covariates",
    "rodeo_global",
    "rodeo_greedy",
    "rodeo_hard",
    "rodeo_soft",
    "save_dataset",
    "sigma_median",
    "sigma_rice",
    "threshold_hard",
    "threshold_modified",
    "weight_vector",
]
