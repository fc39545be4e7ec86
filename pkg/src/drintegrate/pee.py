"""Step 1: penalized estimating equations and the coordinate-wise solver.

The estimating function for the sampling-score coefficients calibrates
inverse-score-weighted Sample-B covariate totals to the design-weighted
Sample-A totals; the one for the outcome coefficients is the residual
moment condition on Sample B.  Both blocks are penalized with the SCAD
derivative and solved by cycling coordinate Newton updates on the
epsilon-perturbed surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import LINEAR, NonProbabilitySample, ProbabilitySample, ModelSpec, eval_link
from .numerics import expit


class DivergedUpdate(Exception):
    """A coordinate left the trust region (|theta_j| above the bound)."""


@dataclass
class SolverControls:
    """Knobs of the coordinate-wise penalized solver."""

    max_cycles: int = 500
    update_tol: float = 1e-8
    zero_tol: float = 1e-4
    epsilon: float = 1e-6
    scad_a: float = 3.7
    penalize_intercept: bool = False
    score_clip: float = 1e-6
    divergence_bound: float = 1e6
    max_step: float = 1.0
    max_halvings: int = 30


@dataclass
class ThetaEstimate:
    """Stacked coefficient estimate with supports and solver diagnostics."""

    alpha: np.ndarray
    beta: np.ndarray
    support_alpha: list = field(default_factory=list)
    support_beta: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    final_update_norm: float = 0.0
    clip_events: int = 0


def u1(alpha, a: ProbabilitySample, b: NonProbabilitySample, population_size: int,
       clip: float = 1e-6) -> np.ndarray:
    """Calibration estimating function for the sampling-score coefficients.

    ``N^{-1} [sum_B X_i / score(X_i'alpha) - sum_A X_i / pi_{A,i}]`` with the
    score clipped below at ``clip`` before inversion.
    """
    alpha = np.asarray(alpha, dtype=float)
    total = np.zeros_like(alpha)
    if b.n:
        score = np.maximum(np.asarray(expit(b.covariates @ alpha)), clip)
        total += b.covariates.T @ (1.0 / score)
    if a.n:
        total -= a.covariates.T @ a.design_weights
    return total / population_size


def u2(beta, b: NonProbabilitySample, family: str, population_size: int) -> np.ndarray:
    """Residual estimating function for the outcome coefficients."""
    beta = np.asarray(beta, dtype=float)
    if not b.n:
        return np.zeros_like(beta)
    resid = b.outcomes - eval_link(family, b.covariates @ beta).value
    return (b.covariates.T @ resid) / population_size


def jacobian_u(theta, a: ProbabilitySample, b: NonProbabilitySample, family: str,
               population_size: int, clip: float = 1e-6) -> np.ndarray:
    """Block-diagonal derivative of the stacked estimating function.

    The outcome block uses the squared first derivative of the link, which
    coincides with the literal derivative only for the identity link.
    """
    theta = np.asarray(theta, dtype=float)
    p = theta.size // 2
    out = np.zeros((2 * p, 2 * p))
    if b.n:
        xb = b.covariates
        score = np.maximum(np.asarray(expit(xb @ theta[:p])), clip)
        w1 = (1.0 - score) / score
        out[:p, :p] = -(xb.T * w1) @ xb / population_size
        d1 = eval_link(family, xb @ theta[p:]).d1
        out[p:, p:] = -(xb.T * d1 ** 2) @ xb / population_size
    return out


def initial_theta(a: ProbabilitySample, b: NonProbabilitySample, spec: ModelSpec):
    """Starting values: zero slopes, intercepts matched to marginal rates."""
    p = b.covariates.shape[1]
    alpha = np.zeros(p)
    rate = min(max(b.n / spec.population_size, 1e-12), 1 - 1e-12)
    alpha[0] = np.log(rate / (1.0 - rate))
    beta = np.zeros(p)
    ybar = float(b.outcomes.mean()) if b.n else 0.0
    if spec.outcome_family == LINEAR:
        beta[0] = ybar
    else:
        ybar = min(max(ybar, 1.0 / (b.n + 1.0)), b.n / (b.n + 1.0))
        beta[0] = np.log(ybar / (1.0 - ybar))
    return alpha, beta


def _cd_alpha(xb, xb2, a_colsum, n_pop, lam, controls, init):
    """Coordinate cycling for the sampling-score block.

    Returns (theta, cycles, converged, last_max_delta, clip_events).
    """
    theta = np.array(init, dtype=float)
    cycles, status, max_delta = _kernels.cd_alpha(
        np.ascontiguousarray(xb), np.ascontiguousarray(xb2),
        np.ascontiguousarray(a_colsum, dtype=float), float(n_pop), float(lam),
        controls.scad_a, controls.epsilon, controls.score_clip,
        controls.penalize_intercept, controls.max_cycles, controls.update_tol,
        controls.max_step, controls.max_halvings, controls.divergence_bound,
        theta)
    if status == _kernels.STATUS_DIVERGED:
        raise DivergedUpdate("an alpha coordinate exceeded the bound")
    clip_events = 0
    if xb.size:
        score = np.asarray(expit(xb @ theta))
        clip_events = int(np.count_nonzero(score < controls.score_clip))
    return theta, cycles, status == _kernels.STATUS_OK, max_delta, clip_events


def _cd_beta(xb, xb2, y, family, n_pop, lam, controls, init):
    """Coordinate cycling for the outcome block."""
    theta = np.array(init, dtype=float)
    cycles, status, max_delta = _kernels.cd_beta(
        np.ascontiguousarray(xb), np.ascontiguousarray(xb2),
        np.ascontiguousarray(y, dtype=float), family == LINEAR, float(n_pop),
        float(lam), controls.scad_a, controls.epsilon,
        controls.penalize_intercept, controls.max_cycles, controls.update_tol,
        controls.max_step, controls.max_halvings, controls.divergence_bound,
        theta)
    if status == _kernels.STATUS_DIVERGED:
        raise DivergedUpdate("a beta coordinate exceeded the bound")
    return theta, cycles, status == _kernels.STATUS_OK, max_delta


def _threshold_support(theta, zero_tol):
    out = theta.copy()
    small = np.abs(out[1:]) <= zero_tol
    out[1:][small] = 0.0
    support = [j for j in range(1, out.size) if out[j] != 0.0]
    return out, support


def solve_alpha_block(a: ProbabilitySample, b: NonProbabilitySample, spec: ModelSpec,
                      lam: float, controls: SolverControls, init) -> np.ndarray:
    """Fit only the sampling-score block; used by the tuning loops."""
    xb = b.covariates
    a_colsum = a.covariates.T @ a.design_weights if a.n else np.zeros(xb.shape[1])
    alpha, _, _, _, _ = _cd_alpha(xb, xb * xb, a_colsum, spec.population_size,
                                  lam, controls, init)
    alpha, _ = _threshold_support(alpha, controls.zero_tol)
    return alpha


def solve_beta_block(b: NonProbabilitySample, spec: ModelSpec,
                     lam: float, controls: SolverControls, init) -> np.ndarray:
    """Fit only the outcome block; used by the tuning loops."""
    xb = b.covariates
    beta, _, _, _ = _cd_beta(xb, xb * xb, b.outcomes, spec.outcome_family,
                             spec.population_size, lam, controls, init)
    beta, _ = _threshold_support(beta, controls.zero_tol)
    return beta


def solve_penalized(a: ProbabilitySample, b: NonProbabilitySample, spec: ModelSpec,
                    lambda_alpha: float, lambda_beta: float,
                    controls: SolverControls | None = None,
                    init: tuple | None = None) -> ThetaEstimate:
    """Solve the SCAD-penalized estimating equations for both blocks.

    The two blocks are separable and solved independently.  Coordinates
    whose magnitude falls at or below ``controls.zero_tol`` after
    convergence are hard-thresholded to zero (intercepts excluded).
    """
    controls = controls or SolverControls()
    if lambda_alpha < 0 or lambda_beta < 0:
        raise ValueError("penalty levels must be nonnegative")
    spec.validate_samples(a, b)
    if init is None:
        alpha0, beta0 = initial_theta(a, b, spec)
    else:
        alpha0, beta0 = (np.array(v, dtype=float) for v in init)

    xb = b.covariates
    xb2 = xb * xb
    a_colsum = a.covariates.T @ a.design_weights if a.n else np.zeros(xb.shape[1])
    n_pop = spec.population_size

    alpha, it_a, conv_a, upd_a, clips = _cd_alpha(
        xb, xb2, a_colsum, n_pop, lambda_alpha, controls, alpha0)
    beta, it_b, conv_b, upd_b = _cd_beta(
        xb, xb2, b.outcomes, spec.outcome_family, n_pop, lambda_beta, controls, beta0)

    alpha, support_alpha = _threshold_support(alpha, controls.zero_tol)
    beta, support_beta = _threshold_support(beta, controls.zero_tol)
    return ThetaEstimate(
        alpha=alpha,
        beta=beta,
        support_alpha=support_alpha,
        support_beta=support_beta,
        iterations=max(it_a, it_b),
        converged=conv_a and conv_b,
        final_update_norm=max(upd_a, upd_b),
        clip_events=clips,
    )
