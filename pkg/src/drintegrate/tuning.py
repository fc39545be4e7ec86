"""K-fold cross-validation over paired folds of the two samples.

Folds of Sample A and Sample B are formed by independent shuffles under
a shared seed and paired by fold id.  The two penalty levels are tuned
independently: the sampling-score block against held-out calibration
imbalance and the outcome block against held-out squared prediction
error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelSpec, NonProbabilitySample, ProbabilitySample, eval_link
from .numerics import expit
from .pee import (SolverControls, initial_theta, solve_alpha_block,
                  solve_beta_block, u1, u2)


class AllFitsFailed(Exception):
    """No grid value produced a usable fit on any fold."""


@dataclass(frozen=True)
class CvPlan:
    """Per-row fold ids for both samples."""

    k: int
    fold_assignment_a: np.ndarray
    fold_assignment_b: np.ndarray
    seed: int


def make_cv_plan(n_a: int, n_b: int, k: int = 10, seed: int = 0) -> CvPlan:
    """Assign rows of each sample to K folds of near-equal size."""
    if k < 2:
        raise ValueError("K must be at least 2")
    rng = np.random.default_rng(seed)

    def assign(n):
        ids = np.arange(n) % k
        rng.shuffle(ids)
        return ids

    return CvPlan(k=k, fold_assignment_a=assign(n_a), fold_assignment_b=assign(n_b),
                  seed=seed)


@dataclass(frozen=True)
class LambdaGrid:
    """Descending positive penalty grids for the two blocks."""

    values_alpha: np.ndarray
    values_beta: np.ndarray

    def __post_init__(self):
        for vals in (self.values_alpha, self.values_beta):
            v = np.asarray(vals, dtype=float)
            if v.size == 0 or np.any(v <= 0) or np.any(np.diff(v) >= 0):
                raise ValueError("grid values must be positive and strictly decreasing")


def default_grid(a: ProbabilitySample, b: NonProbabilitySample, spec: ModelSpec,
                 size: int = 25, min_ratio: float = 0.01) -> LambdaGrid:
    """Log-spaced grid from the all-zero penalty level down to a fraction of it.

    The top of each grid is the largest estimating-function component at
    the initialization, the level at which every non-intercept coordinate
    stays pinned at zero.
    """
    alpha0, beta0 = initial_theta(a, b, spec)
    lam_a = float(np.max(np.abs(u1(alpha0, a, b, spec.population_size)[1:])))
    lam_b = float(np.max(np.abs(u2(beta0, b, spec.outcome_family,
                                   spec.population_size)[1:])))
    lam_a = max(lam_a, 1e-8)
    lam_b = max(lam_b, 1e-8)
    if size == 1:
        return LambdaGrid(np.array([lam_a]), np.array([lam_b]))
    return LambdaGrid(np.geomspace(lam_a, min_ratio * lam_a, size),
                      np.geomspace(lam_b, min_ratio * lam_b, size))


def loss_alpha(alpha_hat, a_valid: ProbabilitySample, b_valid: NonProbabilitySample,
               clip: float = 1e-6) -> float:
    """Squared calibration imbalance of the held-out fold pair, summed over
    covariates, on the unscaled (population-total) scale."""
    p = np.asarray(alpha_hat).size
    imbalance = np.zeros(p)
    if b_valid.n:
        score = np.maximum(np.asarray(expit(b_valid.covariates @ alpha_hat)), clip)
        imbalance += b_valid.covariates.T @ (1.0 / score)
    if a_valid.n:
        imbalance -= a_valid.covariates.T @ a_valid.design_weights
    return float(imbalance @ imbalance)


def loss_beta(beta_hat, b_valid: NonProbabilitySample, family: str) -> float:
    """Sum of squared held-out residuals (both families use squared error)."""
    if not b_valid.n:
        return 0.0
    resid = b_valid.outcomes - eval_link(family, b_valid.covariates @ beta_hat).value
    return float(resid @ resid)


@dataclass
class CvResult:
    lambda_alpha: float
    lambda_beta: float
    table: list = field(default_factory=list)  # rows: (block, lambda, fold, loss)


def _subsample_a(a: ProbabilitySample, mask) -> ProbabilitySample:
    return ProbabilitySample(a.covariates[mask], a.inclusion_probs[mask])


def _subsample_b(b: NonProbabilitySample, mask) -> NonProbabilitySample:
    return NonProbabilitySample(b.covariates[mask], b.outcomes[mask])


def select_lambdas(a: ProbabilitySample, b: NonProbabilitySample, spec: ModelSpec,
                   grid: LambdaGrid, plan: CvPlan,
                   controls: SolverControls | None = None) -> CvResult:
    """Pick the loss-minimizing penalty level per block by paired K-fold CV.

    Fits along each grid are warm-started from the previous (larger)
    penalty level.  Fold losses are summed per grid value; ties break
    toward the larger penalty.  Failed fits poison that grid value.
    """
    controls = controls or SolverControls()
    k = plan.k
    n_alpha = len(grid.values_alpha)
    n_beta = len(grid.values_beta)
    losses_a = np.zeros(n_alpha)
    losses_b = np.zeros(n_beta)
    table = []

    train_frac = (k - 1) / k
    spec_train = ModelSpec(spec.outcome_family,
                           max(int(round(spec.population_size * train_frac)), 1),
                           spec.standardize)

    any_alpha_ok = False
    any_beta_ok = False
    for fold in range(k):
        tr_a = _subsample_a(a, plan.fold_assignment_a != fold)
        va_a = _subsample_a(a, plan.fold_assignment_a == fold)
        tr_b = _subsample_b(b, plan.fold_assignment_b != fold)
        va_b = _subsample_b(b, plan.fold_assignment_b == fold)

        init_alpha, init_beta = initial_theta(tr_a, tr_b, spec_train)
        warm = init_alpha
        for i, lam in enumerate(grid.values_alpha):
            try:
                warm = solve_alpha_block(tr_a, tr_b, spec_train, lam, controls, warm)
                loss = loss_alpha(warm, va_a, va_b, controls.score_clip)
                any_alpha_ok = True
            except Exception:
                warm = init_alpha
                loss = np.inf
            losses_a[i] += loss
            table.append(("alpha", float(lam), fold, loss))

        warm = init_beta
        for i, lam in enumerate(grid.values_beta):
            try:
                warm = solve_beta_block(tr_b, spec_train, lam, controls, warm)
                loss = loss_beta(warm, va_b, spec.outcome_family)
                any_beta_ok = True
            except Exception:
                warm = init_beta
                loss = np.inf
            losses_b[i] += loss
            table.append(("beta", float(lam), fold, loss))

    if not (any_alpha_ok and any_beta_ok):
        raise AllFitsFailed("every fold failed for at least one block")

    # grids are descending, so argmin returns the largest lambda on ties
    best_a = float(grid.values_alpha[int(np.argmin(losses_a))])
    best_b = float(grid.values_beta[int(np.argmin(losses_b))])
    return CvResult(lambda_alpha=best_a, lambda_beta=best_b, table=table)
