import numpy as np
import pytest
from scipy import optimize

from drintegrate.model import (LINEAR, LOGIT, ModelSpec, NonProbabilitySample,
                               ProbabilitySample)
from drintegrate.pee import (SolverControls, initial_theta, jacobian_u,
                             solve_alpha_block, solve_beta_block,
                             solve_penalized, u1, u2)
from conftest import make_samples


def _tiny():
    """Two B rows, one A row, p = 2 — everything checkable by hand."""
    xb = np.array([[1.0, 2.0], [1.0, -1.0]])
    xa = np.array([[1.0, 0.5]])
    b = NonProbabilitySample(xb, np.array([3.0, 1.0]))
    a = ProbabilitySample(xa, np.array([0.25]))
    return a, b


def test_u1_hand_sum():
    a, b = _tiny()
    alpha = np.array([0.1, -0.2])
    n_pop = 10
    score = 1.0 / (1.0 + np.exp(-(b.covariates @ alpha)))
    expected = (b.covariates.T @ (1.0 / score) - a.covariates.T @ np.array([4.0])) / n_pop
    got = u1(alpha, a, b, n_pop)
    assert np.max(np.abs(got - expected)) < 1e-12


def test_u2_hand_sum_identity():
    _, b = _tiny()
    beta = np.array([0.5, 0.25])
    n_pop = 10
    resid = b.outcomes - b.covariates @ beta
    expected = b.covariates.T @ resid / n_pop
    assert np.max(np.abs(u2(beta, b, LINEAR, n_pop) - expected)) < 1e-12


def test_u2_hand_sum_logit():
    xb = np.array([[1.0, 2.0], [1.0, -1.0]])
    b = NonProbabilitySample(xb, np.array([1.0, 0.0]))
    beta = np.array([0.3, -0.4])
    n_pop = 10
    m = 1.0 / (1.0 + np.exp(-(xb @ beta)))
    expected = xb.T @ (b.outcomes - m) / n_pop
    assert np.max(np.abs(u2(beta, b, LOGIT, n_pop) - expected)) < 1e-12


def _fd_jacobian(fun, theta, h=1e-6):
    theta = np.asarray(theta, dtype=float)
    out = np.empty((theta.size, theta.size))
    for j in range(theta.size):
        bump = np.zeros_like(theta)
        bump[j] = h
        out[:, j] = (fun(theta + bump) - fun(theta - bump)) / (2 * h)
    return out


@pytest.mark.parametrize("family", [LINEAR, LOGIT])
def test_alpha_jacobian_matches_finite_differences(family):
    a, b, spec, _ = make_samples(seed=21, family=family)
    p = b.covariates.shape[1]
    rng = np.random.default_rng(0)
    theta = np.concatenate([rng.normal(scale=0.3, size=p), np.zeros(p)])
    jac = jacobian_u(theta, a, b, family, spec.population_size)
    fd = _fd_jacobian(lambda v: u1(v, a, b, spec.population_size), theta[:p])
    scale = max(np.max(np.abs(fd)), 1.0)
    assert np.max(np.abs(jac[:p, :p] - fd)) / scale < 1e-5


def test_beta_jacobian_matches_finite_differences_identity_link():
    a, b, spec, _ = make_samples(seed=22, family="linear")
    p = b.covariates.shape[1]
    rng = np.random.default_rng(1)
    theta = np.concatenate([np.zeros(p), rng.normal(scale=0.3, size=p)])
    jac = jacobian_u(theta, a, b, LINEAR, spec.population_size)
    fd = _fd_jacobian(lambda v: u2(v, b, LINEAR, spec.population_size), theta[p:])
    scale = max(np.max(np.abs(fd)), 1.0)
    assert np.max(np.abs(jac[p:, p:] - fd)) / scale < 1e-5


def test_jacobian_is_block_diagonal():
    a, b, spec, _ = make_samples(seed=23)
    p = b.covariates.shape[1]
    jac = jacobian_u(np.zeros(2 * p), a, b, LINEAR, spec.population_size)
    assert np.all(jac[:p, p:] == 0.0) and np.all(jac[p:, :p] == 0.0)


@pytest.mark.parametrize("family", [LINEAR, LOGIT])
def test_unpenalized_solution_matches_dense_root(family):
    a, b, spec, _ = make_samples(seed=24, family=family)
    n_pop = spec.population_size
    est = solve_penalized(a, b, spec, 0.0, 0.0, SolverControls(zero_tol=0.0))
    assert est.converged

    alpha0, beta0 = initial_theta(a, b, spec)
    ora_a = optimize.root(lambda v: u1(v, a, b, n_pop), alpha0, tol=1e-13)
    ora_b = optimize.root(lambda v: u2(v, b, family, n_pop), beta0, tol=1e-13)
    assert ora_a.success and ora_b.success
    assert np.max(np.abs(est.alpha - ora_a.x)) < 1e-6
    assert np.max(np.abs(est.beta - ora_b.x)) < 1e-6


def test_blocks_are_separable():
    a, b, spec, _ = make_samples(seed=25)
    est = solve_penalized(a, b, spec, 0.05, 0.05)
    # perturbing the outcomes must leave the sampling-score block alone
    b_shift = NonProbabilitySample(b.covariates, b.outcomes + 2.5)
    est_shift = solve_penalized(a, b_shift, spec, 0.05, 0.05)
    assert np.array_equal(est.alpha, est_shift.alpha)
    assert not np.array_equal(est.beta, est_shift.beta)


def test_huge_penalty_zeroes_all_slopes():
    a, b, spec, _ = make_samples(seed=26)
    est = solve_penalized(a, b, spec, 50.0, 50.0)
    assert est.support_alpha == [] and est.support_beta == []
    assert np.all(est.alpha[1:] == 0.0) and np.all(est.beta[1:] == 0.0)
    # unpenalized intercepts still fit their marginal equations
    assert abs(est.beta[0] - b.outcomes.mean()) < 1e-6


def test_moderate_penalty_recovers_generating_support():
    a, b, spec, truth = make_samples(seed=27, n_pop=4000, standardize=False)
    est = solve_penalized(a, b, spec, 0.08, 0.02)
    true_beta = set(np.flatnonzero(truth["beta"][1:]) + 1)
    assert true_beta.issubset(set(est.support_beta))


def test_zero_tolerance_thresholding():
    a, b, spec, _ = make_samples(seed=28)
    est = solve_penalized(a, b, spec, 0.2, 0.2, SolverControls(zero_tol=1e-4))
    small = (np.abs(est.alpha[1:]) > 0) & (np.abs(est.alpha[1:]) <= 1e-4)
    assert not small.any()  # anything at or below the tolerance was zeroed


def test_negative_lambda_rejected():
    a, b, spec, _ = make_samples(seed=29)
    with pytest.raises(ValueError):
        solve_penalized(a, b, spec, -0.1, 0.1)


def test_initial_theta_matches_marginals():
    a, b, spec, _ = make_samples(seed=30)
    alpha0, beta0 = initial_theta(a, b, spec)
    rate = b.n / spec.population_size
    assert alpha0[0] == pytest.approx(np.log(rate / (1 - rate)))
    assert beta0[0] == pytest.approx(b.outcomes.mean())
    assert np.all(alpha0[1:] == 0.0) and np.all(beta0[1:] == 0.0)


def test_single_block_solvers_agree_with_joint_call():
    a, b, spec, _ = make_samples(seed=31)
    controls = SolverControls()
    alpha0, beta0 = initial_theta(a, b, spec)
    est = solve_penalized(a, b, spec, 0.05, 0.03, controls)
    alpha = solve_alpha_block(a, b, spec, 0.05, controls, alpha0)
    beta = solve_beta_block(b, spec, 0.03, controls, beta0)
    assert np.allclose(alpha, est.alpha, atol=1e-12)
    assert np.allclose(beta, est.beta, atol=1e-12)
