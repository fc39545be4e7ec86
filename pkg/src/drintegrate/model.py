"""Domain representation of the two samples and the working models.

Sample A is a probability sample carrying known first-order inclusion
probabilities; Sample B is a non-probability sample carrying outcomes.
Both covariate matrices include a leading intercept column of ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import expit

LINEAR = "linear"
LOGIT = "logit"
FAMILIES = (LINEAR, LOGIT)


class DegenerateColumn(Exception):
    """A covariate column is constant across the pooled samples."""


def _check_covariates(x: np.ndarray, label: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"{label}: covariates must be 2-d")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{label}: covariates contain non-finite values")
    if x.shape[0] > 0 and not np.all(x[:, 0] == 1.0):
        raise ValueError(f"{label}: first covariate column must be all ones")
    return x


@dataclass(frozen=True)
class ProbabilitySample:
    """Sample A: covariates plus first-order inclusion probabilities."""

    covariates: np.ndarray
    inclusion_probs: np.ndarray

    def __post_init__(self):
        x = _check_covariates(self.covariates, "sample A")
        pi = np.asarray(self.inclusion_probs, dtype=float)
        if pi.shape != (x.shape[0],):
            raise ValueError("sample A: one inclusion probability per row required")
        if pi.size and (not np.all(np.isfinite(pi)) or np.any(pi <= 0) or np.any(pi > 1)):
            raise ValueError("sample A: inclusion probabilities must lie in (0, 1]")
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "inclusion_probs", pi)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def design_weights(self) -> np.ndarray:
        return 1.0 / self.inclusion_probs


@dataclass(frozen=True)
class NonProbabilitySample:
    """Sample B: covariates plus observed outcomes."""

    covariates: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        x = _check_covariates(self.covariates, "sample B")
        y = np.asarray(self.outcomes, dtype=float)
        if y.shape != (x.shape[0],):
            raise ValueError("sample B: one outcome per row required")
        if y.size and not np.all(np.isfinite(y)):
            raise ValueError("sample B: outcomes contain non-finite values")
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "outcomes", y)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]


@dataclass(frozen=True)
class ModelSpec:
    """Outcome family plus population size; the sampling-score link is logit."""

    outcome_family: str
    population_size: int
    standardize: bool = True

    def __post_init__(self):
        if self.outcome_family not in FAMILIES:
            raise ValueError(f"unknown outcome family {self.outcome_family!r}")
        if self.population_size < 1:
            raise ValueError("population size must be positive")

    def validate_samples(self, a: ProbabilitySample, b: NonProbabilitySample):
        if self.population_size < a.n or self.population_size < b.n:
            raise ValueError("population size smaller than a sample size")
        if a.covariates.shape[1] != b.covariates.shape[1]:
            raise ValueError("samples have different covariate dimensions")
        if self.outcome_family == LOGIT and b.n:
            if not np.all(np.isin(b.outcomes, (0.0, 1.0))):
                raise ValueError("binary family requires outcomes in {0, 1}")


@dataclass(frozen=True)
class LinkEval:
    """Link value and its first two derivatives at a linear predictor."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


def eval_link(family: str, t) -> LinkEval:
    """Evaluate the outcome mean function m(t) with derivatives.

    Identity link: (t, 1, 0).  Logit link: (expit(t), m(1-m), m(1-m)(1-2m)).
    """
    t = np.asarray(t, dtype=float)
    if family == LINEAR:
        return LinkEval(t, np.ones_like(t), np.zeros_like(t))
    if family == LOGIT:
        m = np.asarray(expit(t))
        d1 = m * (1.0 - m)
        return LinkEval(m, d1, d1 * (1.0 - 2.0 * m))
    raise ValueError(f"unknown outcome family {family!r}")


@dataclass(frozen=True)
class ScaleInfo:
    """Centering/scaling applied to non-intercept columns.

    Scaling uses the population SD convention (divide by the pooled row
    count), recorded here so coefficients can be mapped back.
    """

    means: np.ndarray
    sds: np.ndarray
    convention: str = field(default="population")

    def transform(self, x: np.ndarray) -> np.ndarray:
        out = np.array(x, dtype=float)
        out[:, 1:] = (out[:, 1:] - self.means[1:]) / self.sds[1:]
        return out

    def coefficients_to_original(self, coefs: np.ndarray) -> np.ndarray:
        """Map coefficients fit on the standardized scale back to raw covariates."""
        out = np.array(coefs, dtype=float)
        out[1:] = out[1:] / self.sds[1:]
        out[0] = out[0] - np.sum(coefs[1:] * self.means[1:] / self.sds[1:])
        return out


def standardize_covariates(a: ProbabilitySample, b: NonProbabilitySample):
    """Center and scale non-intercept columns of the pooled A and B rows.

    Pooled rows are unweighted; the same affine map is applied to both
    samples and the intercept column is left untouched.

    Raises
    ------
    DegenerateColumn
        If any non-intercept column is constant across the pooled rows.
    """
    pooled = np.vstack([a.covariates, b.covariates])
    means = pooled.mean(axis=0)
    sds = pooled.std(axis=0)  # population SD (ddof=0)
    means[0], sds[0] = 0.0, 1.0
    if np.any(sds[1:] <= 1e-12):
        bad = int(np.where(sds[1:] <= 1e-12)[0][0]) + 1
        raise DegenerateColumn(f"covariate column {bad} is constant in the pooled samples")
    info = ScaleInfo(means=means, sds=sds)
    a_std = ProbabilitySample(info.transform(a.covariates), a.inclusion_probs)
    b_std = NonProbabilitySample(info.transform(b.covariates), b.outcomes)
    return a_std, b_std, info
