"""Functional regression with scalar responses.

Predictor curves are reduced to a few orthonormal-expansion scores, a
quasi-likelihood model links the scores to the response, and the fitted
coefficient function comes with asymptotic tests, simultaneous bands,
order selection and a reproducible simulation harness. Link and variance
functions can be fully specified or estimated semiparametrically.
"""

from .basis import (
    Basis,
    ScoreMatrix,
    eigenbasis,
    estimate_covariance,
    fourier_basis,
    load_basis,
    project_scores,
    reconstruct,
    save_basis,
)
from .domain import (
    Curve,
    FunctionalDataset,
    TimeGrid,
    WeightMeasure,
    center_dataset,
    inner_product,
    load_dataset,
    load_grid,
    quadrature_weights,
    resample_curves,
    save_dataset,
)
from .glm import ModelFit, SolverConfig, gamma_population_estimate, iwls_fit, score_vector
from .inference import (
    InferenceReport,
    band_radius_constant,
    dg_distance_squared,
    eigen_score_diagnostic,
    generalized_covariance,
    no_effect_test,
    simultaneous_band,
    test_statistic,
)
from .links import LinkSpec, cloglog_link, get_link, identity_link, log_link, logit_link
from .selection import (
    FitMethod,
    OrderSelection,
    default_order_range,
    deviance,
    loo_misclassification,
    loo_prediction_error,
    loo_predictions,
    penalty,
    select_order,
)
from .simulate import (
    SimDesign,
    population_gamma,
    coverage_experiment,
    generate_sample,
    link_misspec_experiment,
    power_experiment,
    statistic_calibration,
)
from .smoothing import (
    SmootherConfig,
    backend_name,
    local_poly_smooth,
    rule_of_thumb_bandwidth,
)
from .spqr import LinkEstimate, gamma_hat, monotone_projection, quasi_deviance, spqr_fit

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "Curve",
    "FitMethod",
    "FunctionalDataset",
    "InferenceReport",
    "LinkEstimate",
    "LinkSpec",
    "ModelFit",
    "OrderSelection",
    "ScoreMatrix",
    "SimDesign",
    "SmootherConfig",
    "SolverConfig",
    "TimeGrid",
    "WeightMeasure",
    "backend_name",
    "band_radius_constant",
    "center_dataset",
    "cloglog_link",
    "coverage_experiment",
    "default_order_range",
    "deviance",
    "dg_distance_squared",
    "eigen_score_diagnostic",
    "eigenbasis",
    "estimate_covariance",
    "fourier_basis",
    "gamma_hat",
    "gamma_population_estimate",
    "generalized_covariance",
    "generate_sample",
    "get_link",
    "identity_link",
    "inner_product",
    "iwls_fit",
    "link_misspec_experiment",
    "load_basis",
    "load_dataset",
    "load_grid",
    "local_poly_smooth",
    "log_link",
    "logit_link",
    "loo_misclassification",
    "loo_prediction_error",
    "loo_predictions",
    "monotone_projection",
    "no_effect_test",
    "penalty",
    "population_gamma",
    "power_experiment",
    "project_scores",
    "quadrature_weights",
    "quasi_deviance",
    "reconstruct",
    "resample_curves",
    "rule_of_thumb_bandwidth",
    "save_basis",
    "save_dataset",
    "score_vector",
    "select_order",
    "simultaneous_band",
    "spqr_fit",
    "statistic_calibration",
    "test_statistic",
]
