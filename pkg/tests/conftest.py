import numpy as np
import pytest

from drintegrate.model import ModelSpec, NonProbabilitySample, ProbabilitySample


def make_samples(seed=0, n_pop=1500, p=6, family="linear", standardize=False,
                 alpha=None, beta=None):
    """Small synthetic pair of samples with known generating coefficients.

    Sample B follows a linear-logit selection model; Sample A is a Poisson
    sample with size-proportional inclusion probabilities.  Returns
    (sample_a, sample_b, spec, truth) where truth holds the generating
    coefficients and the population outcome mean.
    """
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n_pop), rng.standard_normal((n_pop, p - 1))])
    if alpha is None:
        alpha = np.zeros(p)
        alpha[0] = -1.0
        alpha[1] = 1.0
        alpha[2] = -0.8
    if beta is None:
        beta = np.zeros(p)
        beta[0] = 1.0
        beta[1] = 1.0
        beta[3] = -1.0

    lp_y = x @ beta
    if family == "linear":
        y = lp_y + rng.standard_normal(n_pop)
    else:
        y = (rng.random(n_pop) < 1.0 / (1.0 + np.exp(-lp_y))).astype(float)

    score = 1.0 / (1.0 + np.exp(-(x @ alpha)))
    in_b = rng.random(n_pop) < score

    size = 0.25 + np.abs(x[:, 1])
    pi = np.minimum(size * (0.15 * n_pop / size.sum()), 1.0)
    in_a = rng.random(n_pop) < pi

    sample_a = ProbabilitySample(x[in_a], pi[in_a])
    sample_b = NonProbabilitySample(x[in_b], y[in_b])
    spec = ModelSpec(family, n_pop, standardize=standardize)
    truth = {"alpha": alpha, "beta": beta, "mu": float(y.mean())}
    return sample_a, sample_b, spec, truth


@pytest.fixture
def small_linear():
    return make_samples(seed=11, family="linear")


@pytest.fixture
def small_logit():
    return make_samples(seed=12, family="logit")
