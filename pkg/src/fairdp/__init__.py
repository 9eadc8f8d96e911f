"""Differentially private fair learning.

A numpy library for training classifiers whose predictions are pushed
toward (conditional) independence of sensitive attributes, with Gaussian
noise calibrated so the training run is differentially private with
respect to the sensitive data (or the full records). The pieces:

- dataset: CSV ingestion, splits, group statistics, adjacency flips
- classifier: multinomial logistic model with exact Jacobians
- fairness: ERMI estimators, the dual saddle terms, violation metrics
- privacy: noise calibration, sensitivity bounds, the empirical audit
- optimizer: noisy projected stochastic gradient descent-ascent
- harness: synthetic data, sweeps, aggregation, CSV emission
"""

from . import exceptions
from .classifier import (
    ModelParams,
    jacobian_proba,
    load_checkpoint,
    loss,
    loss_grad,
    mean_loss,
    mean_loss_grad,
    predict_label,
    predict_proba,
    proba_lipschitz_bound,
    save_checkpoint,
)
from .dataset import (
    SensitiveStats,
    TabularDataset,
    adjacent_sensitive,
    load_csv,
    minibatch,
    one_hot,
    sensitive_stats,
    train_test_split,
)
from .fairness import (
    DEMOGRAPHIC_PARITY,
    EQUALIZED_ODDS,
    DualMatrix,
    DualStack,
    FermiConfig,
    dp_violation,
    eo_psi_grads,
    eo_violation,
    ermi_conditional,
    ermi_hard,
    ermi_soft,
    inner_max_closed_form,
    psi,
    psi_grad_theta,
    psi_grad_w,
    soft_distribution,
)
from .harness import (
    ALL_FEATURES,
    NO_PRIVACY,
    SENSITIVE_ONLY,
    ExperimentConfig,
    SyntheticSpec,
    TradeoffRecord,
    aggregate,
    emit_csv,
    evaluate_metrics,
    run_sweep,
    synth_dataset,
)
from .optimizer import (
    MinMaxProblem,
    SgdaConfig,
    SmoothnessProfile,
    TrainResult,
    dp_fermi_train,
    dp_sgda,
    estimate_smoothness_profile,
    project_box,
    recommended_hyperparams,
    stationarity_gap,
)
from .privacy import (
    NoiseScales,
    PrivacyBudget,
    SensitivityBounds,
    calibrate_all_features,
    calibrate_sensitive_only,
    empirical_sensitivity_audit,
    gaussian_noise,
    min_iterations,
    sensitivity_bounds,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_FEATURES",
    "DEMOGRAPHIC_PARITY",
    "DualMatrix",
    "DualStack",
    "EQUALIZED_ODDS",
    "ExperimentConfig",
    "FermiConfig",
    "MinMaxProblem",
    "ModelParams",
    "NO_PRIVACY",
    "NoiseScales",
    "PrivacyBudget",
    "SENSITIVE_ONLY",
    "SensitiveStats",
    "SensitivityBounds",
    "SgdaConfig",
    "SmoothnessProfile",
    "SyntheticSpec",
    "TabularDataset",
    "TradeoffRecord",
    "TrainResult",
    "adjacent_sensitive",
    "aggregate",
    "calibrate_all_features",
    "calibrate_sensitive_only",
    "dp_fermi_train",
    "dp_sgda",
    "dp_violation",
    "emit_csv",
    "empirical_sensitivity_audit",
    "eo_psi_grads",
    "eo_violation",
    "ermi_conditional",
    "ermi_hard",
    "ermi_soft",
    "estimate_smoothness_profile",
    "evaluate_metrics",
    "exceptions",
    "gaussian_noise",
    "inner_max_closed_form",
    "jacobian_proba",
    "load_checkpoint",
    "load_csv",
    "loss",
    "loss_grad",
    "mean_loss",
    "mean_loss_grad",
    "min_iterations",
    "minibatch",
    "one_hot",
    "predict_label",
    "predict_proba",
    "proba_lipschitz_bound",
    "project_box",
    "psi",
    "psi_grad_theta",
    "psi_grad_w",
    "recommended_hyperparams",
    "run_sweep",
    "save_checkpoint",
    "sensitive_stats",
    "sensitivity_bounds",
    "soft_distribution",
    "stationarity_gap",
    "synth_dataset",
    "train_test_split",
]
