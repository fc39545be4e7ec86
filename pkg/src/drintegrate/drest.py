"""Step 2: doubly robust estimation on the selected support.

The nuisance coefficients are re-estimated on the union of the selected
sampling-score and outcome supports by solving the joint estimating
equations obtained from the gradient of the squared asymptotic bias of
the doubly robust estimator.  The point estimator combines the
inverse-score-weighted Sample-B residuals with the design-weighted
Sample-A predictions, and the variance estimator adds a design-based
component to a score-model component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .model import (LINEAR, ModelSpec, NonProbabilitySample, ProbabilitySample,
                    eval_link)
from .numerics import SingularMatrix, expit, solve_linear
from .pee import ThetaEstimate

POISSON_A = "poisson"
SRS_A = "srs"


class SingularJacobian(Exception):
    """The joint-equation Jacobian stayed singular through damping."""


class MaxIterationsExceeded(Exception):
    """The damped Newton loop did not reach the residual tolerance."""


class UnsupportedDesign(Exception):
    """Variance estimation requested for an unknown Sample-A design."""


@dataclass(frozen=True)
class SelectedSupport:
    """Union of the selected supports; the intercept is always carried."""

    union_set: tuple
    source: dict

    @classmethod
    def from_supports(cls, support_alpha, support_beta) -> "SelectedSupport":
        sa, sb = set(support_alpha), set(support_beta)
        union = tuple(sorted(sa | sb))
        source = {}
        for j in union:
            if j in sa and j in sb:
                source[j] = "both"
            elif j in sa:
                source[j] = "alpha-only"
            else:
                source[j] = "beta-only"
        return cls(union_set=union, source=source)

    @property
    def columns(self) -> np.ndarray:
        """Covariate column indices used in estimation, intercept first."""
        return np.array((0,) + self.union_set, dtype=int)


@dataclass
class EstimateReport:
    """Point estimate, variance components, interval and baselines.

    Variances are reported on the mu scale (the cosmetic min-sample-size
    factor of the sampling-theory expressions is dropped; it cancels in
    interval construction).
    """

    mu_hat: float
    v1_hat: float
    v2_hat: float
    se: float
    ci_low: float
    ci_high: float
    theta_second_step: ThetaEstimate
    baselines: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def _clipped_score(x, alpha, clip):
    return np.maximum(np.asarray(expit(x @ alpha)), clip)


def joint_ee(alpha_c, beta_c, a: ProbabilitySample, b: NonProbabilitySample,
             cols, family: str, population_size: int, clip: float = 1e-6) -> np.ndarray:
    """Stacked bias-gradient estimating function on the selected columns.

    First block: inverse-score-minus-one weighted residual moments over
    Sample B.  Second block: difference between inverse-score-weighted
    Sample-B and design-weighted Sample-A gradients of the outcome mean.
    """
    cols = np.asarray(cols, dtype=int)
    xa = a.covariates[:, cols]
    xb = b.covariates[:, cols]
    n = population_size
    j1 = np.zeros(cols.size)
    j2 = np.zeros(cols.size)
    if b.n:
        score = _clipped_score(xb, alpha_c, clip)
        link = eval_link(family, xb @ beta_c)
        resid = b.outcomes - link.value
        j1 = xb.T @ ((1.0 / score - 1.0) * resid) / n
        j2 = xb.T @ (link.d1 / score) / n
    if a.n:
        d1_a = eval_link(family, xa @ beta_c).d1
        j2 -= xa.T @ (a.design_weights * d1_a) / n
    return np.concatenate([j1, j2])


def solve_joint(a: ProbabilitySample, b: NonProbabilitySample, cols, family: str,
                population_size: int, init_alpha_c, init_beta_c,
                tol_factor: float = 1e-8, max_iter: int = 100,
                fd_step: float = 1e-6, clip: float = 1e-6):
    """Damped Newton solve of the joint estimating equations on ``cols``.

    The Jacobian is taken by central finite differences; singular systems
    fall back to Levenberg-damped least-squares steps with escalating
    damping before failing.

    Returns ``(alpha_c, beta_c, iterations)``.
    """
    cols = np.asarray(cols, dtype=int)
    m = cols.size
    theta = np.concatenate([np.asarray(init_alpha_c, dtype=float),
                            np.asarray(init_beta_c, dtype=float)])

    def residual(vec):
        return joint_ee(vec[:m], vec[m:], a, b, cols, family, population_size, clip)

    r = residual(theta)
    tol = tol_factor * (1.0 + float(np.max(np.abs(r))))
    for iteration in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            return theta[:m], theta[m:], iteration
        jac = np.empty((2 * m, 2 * m))
        for j in range(2 * m):
            bump = np.zeros(2 * m)
            bump[j] = fd_step
            jac[:, j] = (residual(theta + bump) - residual(theta - bump)) / (2 * fd_step)
        try:
            step = solve_linear(jac, -r)
        except SingularMatrix:
            step = _levenberg_step(jac, r)
        # halve the step until the residual norm stops growing
        scale = 1.0
        base = float(np.max(np.abs(r)))
        for _ in range(40):
            cand = theta + scale * step
            r_cand = residual(cand)
            if float(np.max(np.abs(r_cand))) < base or scale < 1e-10:
                break
            scale *= 0.5
        theta, r = cand, r_cand
    if np.max(np.abs(r)) <= tol:
        return theta[:m], theta[m:], max_iter
    raise MaxIterationsExceeded(
        f"joint solver stalled at residual {float(np.max(np.abs(r))):.3e}")


def _levenberg_step(jac, r):
    mu = 1e-4
    gram = jac.T @ jac
    rhs = -jac.T @ r
    while mu <= 1e2:
        try:
            return solve_linear(gram + mu * np.eye(gram.shape[0]), rhs)
        except SingularMatrix:
            mu *= 10.0
    raise SingularJacobian("Levenberg damping exhausted")


def mu_pee(alpha_hat, beta_hat, a: ProbabilitySample, b: NonProbabilitySample,
           family: str, population_size: int, clip: float = 1e-6) -> float:
    """Doubly robust point estimator of the finite-population mean."""
    total = 0.0
    if b.n:
        score = _clipped_score(b.covariates, alpha_hat, clip)
        resid = b.outcomes - eval_link(family, b.covariates @ beta_hat).value
        total += float(np.sum(resid / score))
    if a.n:
        m_a = eval_link(family, a.covariates @ beta_hat).value
        total += float(np.sum(a.design_weights * m_a))
    return total / population_size


def mu_naive(b: NonProbabilitySample) -> float:
    """Unadjusted Sample-B mean."""
    return float(b.outcomes.mean())


def mu_ipw(alpha_hat, b: NonProbabilitySample, population_size: int,
           clip: float = 1e-6) -> float:
    """Inverse-score-weighted Sample-B mean."""
    if not b.n:
        return 0.0
    score = _clipped_score(b.covariates, alpha_hat, clip)
    return float(np.sum(b.outcomes / score)) / population_size


def mu_reg(beta_hat, a: ProbabilitySample, family: str, population_size: int) -> float:
    """Design-weighted mean of the fitted outcome model over Sample A."""
    if not a.n:
        return 0.0
    m_a = eval_link(family, a.covariates @ beta_hat).value
    return float(np.sum(a.design_weights * m_a)) / population_size


def variance_hat(alpha_hat, beta_hat, a: ProbabilitySample, b: NonProbabilitySample,
                 family: str, population_size: int, design: str = POISSON_A,
                 clip: float = 1e-6):
    """Doubly robust variance components on the mu scale.

    The design component applies the design-based variance formula to the
    fitted outcome means over Sample A (Poisson: second-order inclusions
    factorize; SRS without replacement: constant joint inclusions).  The
    score component plugs fitted scores and residuals into the
    model-based expression, with the residual-variance term estimated by
    the pooled mean squared Sample-B residual for the identity link and
    by the binomial variance of the fitted mean for the logit link.
    """
    n_sq = float(population_size) ** 2
    m_a = eval_link(family, a.covariates @ beta_hat).value if a.n else np.zeros(0)
    pi = a.inclusion_probs

    if design == POISSON_A:
        v1 = float(np.sum((1.0 - pi) * m_a ** 2 / pi ** 2)) / n_sq
    elif design == SRS_A:
        n_a, n_pop = a.n, population_size
        if n_a < 2:
            v1 = 0.0
        else:
            pi_i = n_a / n_pop
            pi_ij = n_a * (n_a - 1) / (n_pop * (n_pop - 1))
            g = m_a / pi_i
            diag = float(np.sum((1.0 - pi_i) * g ** 2))
            cross_c = (pi_ij - pi_i ** 2) / pi_ij
            cross = cross_c * (float(np.sum(g)) ** 2 - float(np.sum(g ** 2)))
            v1 = (diag + cross) / n_sq
    else:
        raise UnsupportedDesign(f"no variance formula for design {design!r}")

    v2 = 0.0
    if b.n:
        score = _clipped_score(b.covariates, alpha_hat, clip)
        resid = b.outcomes - eval_link(family, b.covariates @ beta_hat).value
        v2 += float(np.sum((1.0 / score ** 2 - 2.0 / score) * resid ** 2))
        sigma2_b = float(np.mean(resid ** 2))
    else:
        sigma2_b = 0.0
    if a.n:
        if family == LINEAR:
            sigma2_a = np.full(a.n, sigma2_b)
        else:
            sigma2_a = m_a * (1.0 - m_a)
        v2 += float(np.sum(a.design_weights * sigma2_a))
    v2 /= n_sq
    return v1, v2


def wald_ci(mu_hat: float, se: float, level: float = 0.95):
    """Symmetric normal-quantile interval around the point estimate."""
    if se < 0:
        raise ValueError("standard error must be nonnegative")
    z = float(norm.ppf(0.5 + level / 2.0))
    return mu_hat - z * se, mu_hat + z * se


def mu_dr0(a: ProbabilitySample, b: NonProbabilitySample, support_beta_only,
           family: str, population_size: int, init_alpha, init_beta,
           clip: float = 1e-6) -> float:
    """Doubly robust pipeline restricted to the outcome-predictor support."""
    cols = np.array([0] + sorted(set(support_beta_only)), dtype=int)
    alpha_c, beta_c, _ = solve_joint(a, b, cols, family, population_size,
                                     np.asarray(init_alpha)[cols],
                                     np.asarray(init_beta)[cols], clip=clip)
    alpha_full = np.zeros(a.covariates.shape[1])
    beta_full = np.zeros(a.covariates.shape[1])
    alpha_full[cols] = alpha_c
    beta_full[cols] = beta_c
    return mu_pee(alpha_full, beta_full, a, b, family, population_size, clip)
