"""Doubly robust finite-population inference combining a probability
sample (design weights plus covariates) with a non-probability sample
(covariates plus outcomes)."""

from .model import (LINEAR, LOGIT, ModelSpec, NonProbabilitySample,
                    ProbabilitySample, standardize_covariates)
from .pee import SolverControls, ThetaEstimate, solve_penalized
from .tuning import LambdaGrid, make_cv_plan, select_lambdas
from .drest import (EstimateReport, SelectedSupport, mu_ipw, mu_naive, mu_pee,
                    mu_reg, variance_hat, wald_ci)
from .pipeline import estimate_population_mean
from .estimator import DoublyRobustMeanEstimator, PenalizedSelector

__all__ = [
    "LINEAR", "LOGIT", "ModelSpec", "NonProbabilitySample", "ProbabilitySample",
    "standardize_covariates", "SolverControls", "ThetaEstimate", "solve_penalized",
    "LambdaGrid", "make_cv_plan", "select_lambdas", "EstimateReport",
    "SelectedSupport", "mu_ipw", "mu_naive", "mu_pee", "mu_reg", "variance_hat",
    "wald_ci", "estimate_population_mean", "DoublyRobustMeanEstimator",
    "PenalizedSelector",
]

__version__ = "0.1.0"
