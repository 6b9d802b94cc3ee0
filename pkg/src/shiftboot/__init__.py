"""shiftboot: prevalence and class-mean inference from classifier
predictions under label shift, with semiparametric bootstrap intervals.

The pipeline: fit a penalized spline classifier on labeled training
data, estimate each test condition's class-1 prevalence (confusion
matrix inversion or fixed-point search), correct the predictions by
Bayes' rule, then feed the corrected probabilities into a weighted
random-intercept model or a hierarchical Gaussian mixture. Bootstrap
procedures regenerate synthetic test sets to produce confidence
intervals for prevalences and class means.
"""

__version__ = "0.1.0"

from .exceptions import DataError, FitError
from .data import (
    Dataset,
    Record,
    condition_prevalence,
    load_dataset,
    save_dataset,
    split_by_group,
)
from .splines import BasisSpec
from .classifier import (
    CalibrationTable,
    ClassifierModel,
    calibration_table,
    fit_classifier,
    load_model,
    predict_proba,
    sample_classifier,
    save_model,
)
from .shift import (
    ShiftEstimate,
    correct_predictions,
    corrected_probs,
    estimate_prevalence_discretization,
    estimate_prevalence_fixed_point,
    naive_prevalence,
)
from .lmm import (
    MixedEffectsFit,
    fit_weighted_lmm,
    threshold_class_mean,
    weighted_class_mean,
)
from .mixture import MixtureFit, component_curves, fit_hier_gmm, mixture_loglik
from .bootstrap import (
    BootstrapConfig,
    BootstrapResult,
    bootstrap_mean_ci_lmm,
    bootstrap_mean_ci_mixture,
    bootstrap_prevalence_ci,
    interval_from_replicates,
)
from .simulate import (
    CoverageReport,
    ScenarioSpec,
    coverage_study,
    generate_scenario,
    sample_skew_normal,
    scenario_truth,
    sufficiency_check,
)
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = [
    "BasisSpec",
    "BootstrapConfig",
    "BootstrapResult",
    "CalibrationTable",
    "ClassifierModel",
    "CoverageReport",
    "DataError",
    "Dataset",
    "FitError",
    "KERNEL_BACKEND",
    "MixedEffectsFit",
    "MixtureFit",
    "Record",
    "ScenarioSpec",
    "ShiftEstimate",
    "__version__",
    "bootstrap_mean_ci_lmm",
    "bootstrap_mean_ci_mixture",
    "bootstrap_prevalence_ci",
    "calibration_table",
    "component_curves",
    "condition_prevalence",
    "correct_predictions",
    "corrected_probs",
    "coverage_study",
    "estimate_prevalence_discretization",
    "estimate_prevalence_fixed_point",
    "fit_classifier",
    "fit_hier_gmm",
    "fit_weighted_lmm",
    "generate_scenario",
    "interval_from_replicates",
    "load_dataset",
    "load_model",
    "mixture_loglik",
    "naive_prevalence",
    "predict_proba",
    "sample_classifier",
    "sample_skew_normal",
    "save_dataset",
    "save_model",
    "scenario_truth",
    "split_by_group",
    "sufficiency_check",
    "threshold_class_mean",
    "weighted_class_mean",
]
