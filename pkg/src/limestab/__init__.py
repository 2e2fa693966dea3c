"""Tabular local surrogate explanations with stability diagnostics.

The pipeline: draw Gaussian perturbations around a query point, score them
with the black-box model, weight them by proximity, select a small feature
subset by weighted Lasso, and fit a weighted ridge surrogate whose
coefficients come with exact confidence intervals. Repeating the pipeline
and comparing the resulting models yields two stability indices: one for
the chosen variables, one for the coefficient intervals.
"""

from .blackbox import (
    ExternalPredictor,
    Predictor,
    PredictorError,
    builtin_catalog,
    make_builtin,
    make_predictor,
    predict,
)
from .core import (
    ConfigError,
    DataError,
    Dataset,
    ExplainerConfig,
    FeatureStats,
    LocalModel,
    StabilityReport,
    load_dataset,
    save_dataset,
    validate_config,
)
from .datagen import generate, load_bundled
from .explainer import Explanation, explain_once, stability_run
from .feature_selection import FeatureSubset, SelectionError, select_features
from .locality import (
    WeightedBatch,
    build_weighted_batch,
    default_kernel_width,
    distances,
    kernel_weights,
    standardize,
)
from .sampling import (
    SampleBatch,
    derive_repeat_seeds,
    infer_feature_stats,
    sample_perturbations,
)
from .stability import (
    CsiUndefinedError,
    IntervalSet,
    ModelEnsemble,
    concordance,
    csi,
    interval_sets,
    overlap,
    partial_index,
    partial_indices,
    vsi,
)
from .wridge import (
    ConditioningWarning,
    ConfidenceInterval,
    NumericError,
    RidgeFit,
    coefficient_covariance,
    conf_int,
    fit_weighted_ridge,
    residual_variance,
    weighted_ridge_inference,
)

__version__ = "0.1.0"

__all__ = [
    "ConditioningWarning",
    "ConfidenceInterval",
    "ConfigError",
    "CsiUndefinedError",
    "DataError",
    "Dataset",
    "ExplainerConfig",
    "Explanation",
    "ExternalPredictor",
    "FeatureStats",
    "FeatureSubset",
    "IntervalSet",
    "LocalModel",
    "ModelEnsemble",
    "NumericError",
    "Predictor",
    "PredictorError",
    "RidgeFit",
    "SampleBatch",
    "SelectionError",
    "StabilityReport",
    "WeightedBatch",
    "builtin_catalog",
    "build_weighted_batch",
    "coefficient_covariance",
    "concordance",
    "conf_int",
    "csi",
    "default_kernel_width",
    "derive_repeat_seeds",
    "distances",
    "explain_once",
    "fit_weighted_ridge",
    "generate",
    "infer_feature_stats",
    "interval_sets",
    "kernel_weights",
    "load_bundled",
    "load_dataset",
    "make_builtin",
    "make_predictor",
    "overlap",
    "partial_index",
    "partial_indices",
    "predict",
    "residual_variance",
    "sample_perturbations",
    "save_dataset",
    "select_features",
    "stability_run",
    "standardize",
    "validate_config",
    "vsi",
    "weighted_ridge_inference",
]
