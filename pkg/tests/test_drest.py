import numpy as np
import pytest
from scipy import optimize

from drintegrate import drest
from drintegrate.drest import (POISSON_A, SRS_A, SelectedSupport, joint_ee,
                               mu_dr0, mu_ipw, mu_naive, mu_pee, mu_reg,
                               solve_joint, variance_hat, wald_ci)
from drintegrate.model import (LINEAR, LOGIT, NonProbabilitySample,
                               ProbabilitySample)
from conftest import make_samples


class TestSelectedSupport:
    def test_union_and_sources(self):
        sup = SelectedSupport.from_supports([1, 3], [3, 5])
        assert sup.union_set == (1, 3, 5)
        assert sup.source == {1: "alpha-only", 3: "both", 5: "beta-only"}
        assert np.array_equal(sup.columns, [0, 1, 3, 5])

    def test_empty_supports_keep_intercept(self):
        sup = SelectedSupport.from_supports([], [])
        assert sup.union_set == ()
        assert np.array_equal(sup.columns, [0])


def test_joint_ee_hand_enumeration_three_units():
    """N = 3: two Sample-B rows, one Sample-A row, identity link, p = 2."""
    xb = np.array([[1.0, 2.0], [1.0, -1.0]])
    xa = np.array([[1.0, 0.5]])
    y = np.array([3.0, 1.0])
    b = NonProbabilitySample(xb, y)
    a = ProbabilitySample(xa, np.array([0.5]))
    alpha = np.array([0.2, -0.1])
    beta = np.array([1.0, 0.5])
    cols = [0, 1]
    n_pop = 3

    score = 1.0 / (1.0 + np.exp(-(xb @ alpha)))
    resid = y - xb @ beta
    j1 = ((1.0 / score[0] - 1.0) * resid[0] * xb[0]
          + (1.0 / score[1] - 1.0) * resid[1] * xb[1]) / n_pop
    j2 = (xb[0] / score[0] + xb[1] / score[1] - 2.0 * xa[0]) / n_pop

    got = joint_ee(alpha, beta, a, b, cols, LINEAR, n_pop)
    assert np.max(np.abs(got[:2] - j1)) < 1e-12
    assert np.max(np.abs(got[2:] - j2)) < 1e-12


def test_joint_ee_logit_link_uses_mean_derivative():
    xb = np.array([[1.0, 1.0]])
    xa = np.array([[1.0, -2.0]])
    b = NonProbabilitySample(xb, np.array([1.0]))
    a = ProbabilitySample(xa, np.array([1.0]))
    alpha = np.array([0.0, 0.0])
    beta = np.array([0.5, -0.5])
    n_pop = 4

    m_b = 1.0 / (1.0 + np.exp(-(xb @ beta)))
    d1_b = m_b * (1 - m_b)
    m_a = 1.0 / (1.0 + np.exp(-(xa @ beta)))
    d1_a = m_a * (1 - m_a)
    j1 = (1.0 / 0.5 - 1.0) * (1.0 - m_b[0]) * xb[0] / n_pop
    j2 = (d1_b[0] / 0.5 * xb[0] - d1_a[0] * xa[0]) / n_pop
    got = joint_ee(alpha, beta, a, b, [0, 1], LOGIT, n_pop)
    assert np.max(np.abs(got - np.concatenate([j1, j2]))) < 1e-12


@pytest.mark.parametrize("family", [LINEAR, LOGIT])
def test_solve_joint_drives_residual_to_zero(family):
    a, b, spec, _ = make_samples(seed=50, family=family)
    cols = [0, 1, 2, 3]
    from drintegrate.pee import initial_theta
    alpha0, beta0 = initial_theta(a, b, spec)
    alpha_c, beta_c, iters = solve_joint(a, b, cols, family,
                                         spec.population_size,
                                         alpha0[cols], beta0[cols])
    resid = joint_ee(alpha_c, beta_c, a, b, cols, family, spec.population_size)
    assert np.max(np.abs(resid)) < 1e-7
    assert iters < 100


def test_solve_joint_agrees_with_scipy():
    a, b, spec, _ = make_samples(seed=51)
    cols = np.array([0, 1, 3])
    from drintegrate.pee import initial_theta
    alpha0, beta0 = initial_theta(a, b, spec)
    init = np.concatenate([alpha0[cols], beta0[cols]])
    m = cols.size
    sol = optimize.root(
        lambda v: joint_ee(v[:m], v[m:], a, b, cols, LINEAR, spec.population_size),
        init, tol=1e-13)
    assert sol.success
    alpha_c, beta_c, _ = solve_joint(a, b, cols, LINEAR, spec.population_size,
                                     alpha0[cols], beta0[cols])
    assert np.max(np.abs(np.concatenate([alpha_c, beta_c]) - sol.x)) < 1e-6


class TestPointEstimators:
    def test_mu_pee_hand_formula(self):
        xb = np.array([[1.0, 1.0]])
        xa = np.array([[1.0, 2.0]])
        b = NonProbabilitySample(xb, np.array([5.0]))
        a = ProbabilitySample(xa, np.array([0.25]))
        alpha = np.array([0.0, 0.0])
        beta = np.array([1.0, 1.0])
        n_pop = 8
        expected = ((5.0 - 2.0) / 0.5 + 4.0 * 3.0) / n_pop
        assert mu_pee(alpha, beta, a, b, LINEAR, n_pop) == pytest.approx(expected)

    def test_mu_naive_is_sample_mean(self):
        _, b, _, _ = make_samples(seed=52)
        assert mu_naive(b) == pytest.approx(b.outcomes.mean())

    def test_mu_ipw_hand_formula(self):
        xb = np.array([[1.0, 0.0], [1.0, 0.0]])
        b = NonProbabilitySample(xb, np.array([2.0, 4.0]))
        alpha = np.array([0.0, 1.0])  # score = 0.5 for both rows
        assert mu_ipw(alpha, b, 12) == pytest.approx((2.0 / 0.5 + 4.0 / 0.5) / 12)

    def test_mu_reg_hand_formula(self):
        xa = np.array([[1.0, 1.0], [1.0, -1.0]])
        a = ProbabilitySample(xa, np.array([0.5, 0.25]))
        beta = np.array([1.0, 2.0])
        expected = (2.0 * 3.0 + 4.0 * (-1.0)) / 10
        assert mu_reg(beta, a, LINEAR, 10) == pytest.approx(expected)

    def test_oracle_coefficients_recover_population_mean(self):
        a, b, spec, truth = make_samples(seed=53, n_pop=40_000)
        mu = mu_pee(truth["alpha"], truth["beta"], a, b, LINEAR,
                    spec.population_size)
        # both nuisance models true: estimator lands near the real mean
        assert abs(mu - truth["mu"]) < 0.08


class TestVariance:
    def test_certain_inclusion_kills_design_component(self):
        xa = np.array([[1.0, 2.0], [1.0, -1.0]])
        a = ProbabilitySample(xa, np.array([1.0, 1.0]))
        b = NonProbabilitySample(np.empty((0, 2)), np.empty(0))
        v1, v2 = variance_hat(np.zeros(2), np.zeros(2), a, b, LINEAR, 10)
        assert v1 == 0.0

    def test_poisson_design_hand_formula(self):
        xa = np.array([[1.0, 0.0]])
        a = ProbabilitySample(xa, np.array([0.2]))
        b = NonProbabilitySample(np.empty((0, 2)), np.empty(0))
        beta = np.array([3.0, 0.0])  # fitted mean 3 on the single A row
        v1, v2 = variance_hat(np.zeros(2), beta, a, b, LINEAR, 10)
        assert v1 == pytest.approx(0.8 * 9.0 / 0.04 / 100)
        assert v2 == 0.0  # no B rows -> zero pooled residual variance

    def test_srs_design_single_row_is_degenerate(self):
        xa = np.array([[1.0, 0.0]])
        a = ProbabilitySample(xa, np.array([0.2]))
        b = NonProbabilitySample(np.empty((0, 2)), np.empty(0))
        v1, _ = variance_hat(np.zeros(2), np.ones(2), a, b, LINEAR, 10,
                             design=SRS_A)
        assert v1 == 0.0

    def test_unknown_design_raises(self):
        a, b, spec, _ = make_samples(seed=54)
        with pytest.raises(drest.UnsupportedDesign):
            variance_hat(np.zeros(6), np.zeros(6), a, b, LINEAR,
                         spec.population_size, design="cluster")

    def test_logit_family_uses_binomial_variance(self):
        xa = np.array([[1.0, 0.0]])
        a = ProbabilitySample(xa, np.array([1.0]))
        b = NonProbabilitySample(np.empty((0, 2)), np.empty(0))
        beta = np.array([0.0, 0.0])  # fitted probability one half
        _, v2 = variance_hat(np.zeros(2), beta, a, b, LOGIT, 5)
        assert v2 == pytest.approx(0.25 / 25)

    def test_components_scale_with_population_size(self):
        a, b, spec, _ = make_samples(seed=55)
        alpha = np.zeros(6)
        beta = np.zeros(6)
        v1_small, v2_small = variance_hat(alpha, beta, a, b, LINEAR, 1500)
        v1_large, v2_large = variance_hat(alpha, beta, a, b, LINEAR, 3000)
        assert v1_large == pytest.approx(v1_small / 4)
        assert v2_large == pytest.approx(v2_small / 4)


class TestWaldCi:
    def test_ninety_five_percent_quantile(self):
        low, high = wald_ci(1.0, 2.0)
        z = 1.959963984540054
        assert low == pytest.approx(1.0 - z * 2.0)
        assert high == pytest.approx(1.0 + z * 2.0)

    def test_level_is_configurable(self):
        low, high = wald_ci(0.0, 1.0, level=0.9)
        assert high == pytest.approx(1.6448536269514722)

    def test_negative_se_rejected(self):
        with pytest.raises(ValueError):
            wald_ci(0.0, -1.0)

    def test_zero_se_degenerates_to_point(self):
        assert wald_ci(2.0, 0.0) == (2.0, 2.0)


def test_mu_dr0_restricts_to_outcome_support():
    a, b, spec, _ = make_samples(seed=56)
    from drintegrate.pee import initial_theta
    alpha0, beta0 = initial_theta(a, b, spec)
    value = mu_dr0(a, b, [1, 3], LINEAR, spec.population_size, alpha0, beta0)
    assert np.isfinite(value)
    # equals the plug-in estimator at the refit coefficients on those columns
    cols = np.array([0, 1, 3])
    alpha_c, beta_c, _ = solve_joint(a, b, cols, LINEAR, spec.population_size,
                                     alpha0[cols], beta0[cols])
    alpha_full = np.zeros(6)
    beta_full = np.zeros(6)
    alpha_full[cols] = alpha_c
    beta_full[cols] = beta_c
    expected = mu_pee(alpha_full, beta_full, a, b, LINEAR, spec.population_size)
    assert value == pytest.approx(expected)
