"""End-to-end estimation: standardize, tune, select, re-estimate, report."""

from __future__ import annotations

import numpy as np

from . import drest, tuning
from .model import ModelSpec, NonProbabilitySample, ProbabilitySample, ScaleInfo, standardize_covariates
from .pee import SolverControls, solve_penalized, ThetaEstimate


def estimate_population_mean(a: ProbabilitySample, b: NonProbabilitySample,
                             spec: ModelSpec, *, kfolds: int = 10, grid_size: int = 25,
                             seed: int = 0, design: str = drest.POISSON_A,
                             controls: SolverControls | None = None,
                             lambdas: tuple | None = None) -> drest.EstimateReport:
    """Run the full two-step procedure and assemble the report.

    ``lambdas`` may pin ``(lambda_alpha, lambda_beta)`` to skip
    cross-validation (used by smoke-level simulation runs).
    """
    controls = controls or SolverControls()
    spec.validate_samples(a, b)

    if spec.standardize:
        a_std, b_std, scale = standardize_covariates(a, b)
    else:
        p = a.covariates.shape[1]
        scale = ScaleInfo(np.zeros(p), np.ones(p))
        a_std, b_std = a, b

    cv_table = []
    if lambdas is None:
        grid = tuning.default_grid(a_std, b_std, spec, size=grid_size)
        plan = tuning.make_cv_plan(a.n, b.n, k=kfolds, seed=seed)
        cv = tuning.select_lambdas(a_std, b_std, spec, grid, plan, controls)
        lambda_alpha, lambda_beta = cv.lambda_alpha, cv.lambda_beta
        cv_table = cv.table
    else:
        lambda_alpha, lambda_beta = lambdas

    step1 = solve_penalized(a_std, b_std, spec, lambda_alpha, lambda_beta, controls)

    support = drest.SelectedSupport.from_supports(step1.support_alpha,
                                                  step1.support_beta)
    cols = support.columns
    family, n_pop = spec.outcome_family, spec.population_size
    alpha_c, beta_c, joint_iters = drest.solve_joint(
        a_std, b_std, cols, family, n_pop,
        step1.alpha[cols], step1.beta[cols], clip=controls.score_clip)

    p = a.covariates.shape[1]
    alpha_hat = np.zeros(p)
    beta_hat = np.zeros(p)
    alpha_hat[cols] = alpha_c
    beta_hat[cols] = beta_c

    mu_hat = drest.mu_pee(alpha_hat, beta_hat, a_std, b_std, family, n_pop,
                          controls.score_clip)
    v1, v2 = drest.variance_hat(alpha_hat, beta_hat, a_std, b_std, family, n_pop,
                                design, controls.score_clip)
    se = float(np.sqrt(max(v1 + v2, 0.0)))
    ci_low, ci_high = drest.wald_ci(mu_hat, se)

    baselines = {
        "naive": drest.mu_naive(b_std),
        "p-ipw": drest.mu_ipw(step1.alpha, b_std, n_pop, controls.score_clip),
        "p-reg": drest.mu_reg(step1.beta, a_std, family, n_pop),
    }
    try:
        baselines["p-dr0"] = drest.mu_dr0(a_std, b_std, step1.support_beta, family,
                                          n_pop, step1.alpha, step1.beta,
                                          controls.score_clip)
    except Exception as exc:  # baseline failures should not sink the estimate
        baselines["p-dr0"] = float("nan")
        baselines["p-dr0_error"] = repr(exc)

    theta2 = ThetaEstimate(
        alpha=alpha_hat, beta=beta_hat,
        support_alpha=list(step1.support_alpha),
        support_beta=list(step1.support_beta),
        iterations=joint_iters, converged=True,
        final_update_norm=0.0, clip_events=step1.clip_events)

    report = drest.EstimateReport(
        mu_hat=mu_hat, v1_hat=v1, v2_hat=v2, se=se,
        ci_low=ci_low, ci_high=ci_high,
        theta_second_step=theta2,
        baselines=baselines,
        diagnostics={
            "lambda_alpha": lambda_alpha,
            "lambda_beta": lambda_beta,
            "step1_iterations": step1.iterations,
            "step1_converged": step1.converged,
            "joint_iterations": joint_iters,
            "clip_events": step1.clip_events,
            "negative_variance": bool(v1 + v2 < 0),
            "union_support": list(support.union_set),
        },
    )
    # extra artifacts for reporting layers
    report.diagnostics["scale_info"] = scale
    report.diagnostics["theta_step1"] = step1
    report.diagnostics["cv_table"] = cv_table
    return report
