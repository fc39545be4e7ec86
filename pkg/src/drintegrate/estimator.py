"""Scikit-learn style front door for the two-step procedure.

Both estimators follow the fit/get_params convention so they compose
with sklearn tooling; ``fit`` takes the two samples rather than a single
design matrix because the method fundamentally consumes two data
sources.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import drest
from .model import (ModelSpec, NonProbabilitySample, ProbabilitySample,
                    eval_link, standardize_covariates)
from .pee import SolverControls, solve_penalized
from .pipeline import estimate_population_mean
from .tuning import default_grid, make_cv_plan, select_lambdas


class PenalizedSelector(BaseEstimator):
    """Step-1 variable selector via SCAD-penalized estimating equations.

    Parameters mirror the pipeline defaults; when ``lambda_alpha`` or
    ``lambda_beta`` is None the level is chosen by paired K-fold CV.
    """

    def __init__(self, family="linear", population_size=None,
                 lambda_alpha=None, lambda_beta=None,
                 kfolds=10, grid_size=25, standardize=True, seed=0):
        self.family = family
        self.population_size = population_size
        self.lambda_alpha = lambda_alpha
        self.lambda_beta = lambda_beta
        self.kfolds = kfolds
        self.grid_size = grid_size
        self.standardize = standardize
        self.seed = seed

    def fit(self, sample_a: ProbabilitySample, sample_b: NonProbabilitySample):
        if self.population_size is None:
            raise ValueError("population_size is required")
        spec = ModelSpec(self.family, self.population_size, self.standardize)
        spec.validate_samples(sample_a, sample_b)
        if spec.standardize:
            a_std, b_std, scale = standardize_covariates(sample_a, sample_b)
        else:
            a_std, b_std, scale = sample_a, sample_b, None
        controls = SolverControls()
        lam_a, lam_b = self.lambda_alpha, self.lambda_beta
        if lam_a is None or lam_b is None:
            grid = default_grid(a_std, b_std, spec, size=self.grid_size)
            plan = make_cv_plan(sample_a.n, sample_b.n, self.kfolds, self.seed)
            cv = select_lambdas(a_std, b_std, spec, grid, plan, controls)
            lam_a = cv.lambda_alpha if lam_a is None else lam_a
            lam_b = cv.lambda_beta if lam_b is None else lam_b
            self.cv_table_ = cv.table
        est = solve_penalized(a_std, b_std, spec, lam_a, lam_b, controls)
        self.lambda_alpha_ = lam_a
        self.lambda_beta_ = lam_b
        self.alpha_ = est.alpha
        self.beta_ = est.beta
        self.support_alpha_ = list(est.support_alpha)
        self.support_beta_ = list(est.support_beta)
        self.scale_info_ = scale
        self.theta_estimate_ = est
        return self

    def get_support(self):
        """Union of the two selected supports (non-intercept indices)."""
        return sorted(set(self.support_alpha_) | set(self.support_beta_))


class DoublyRobustMeanEstimator(BaseEstimator):
    """Two-step doubly robust estimator of the finite-population mean."""

    def __init__(self, family="linear", population_size=None,
                 kfolds=10, grid_size=25, seed=0, design=drest.POISSON_A,
                 standardize=True):
        self.family = family
        self.population_size = population_size
        self.kfolds = kfolds
        self.grid_size = grid_size
        self.seed = seed
        self.design = design
        self.standardize = standardize

    def fit(self, sample_a: ProbabilitySample, sample_b: NonProbabilitySample):
        if self.population_size is None:
            raise ValueError("population_size is required")
        spec = ModelSpec(self.family, self.population_size, self.standardize)
        report = estimate_population_mean(
            sample_a, sample_b, spec,
            kfolds=self.kfolds, grid_size=self.grid_size,
            seed=self.seed, design=self.design)
        self.report_ = report
        self.mu_ = report.mu_hat
        self.se_ = report.se
        self.ci_ = (report.ci_low, report.ci_high)
        scale = report.diagnostics["scale_info"]
        theta = report.theta_second_step
        self.alpha_ = scale.coefficients_to_original(theta.alpha)
        self.beta_ = scale.coefficients_to_original(theta.beta)
        self.support_alpha_ = list(theta.support_alpha)
        self.support_beta_ = list(theta.support_beta)
        self.scale_info_ = scale
        return self

    def predict(self, X):
        """Fitted outcome means for raw covariate rows (no intercept column)."""
        X = np.asarray(X, dtype=float)
        design = np.column_stack([np.ones(X.shape[0]), X])
        return np.asarray(eval_link(self.family, design @ self.beta_).value)
