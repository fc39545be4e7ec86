"""SCAD penalty derivative and its smooth surrogate weights.

The folded-concave penalty enters the estimating equations only through
its derivative, which is ``lambda`` near zero and vanishes for large
coefficients, and through the epsilon-perturbed surrogate used by the
coordinate-wise solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_A = 3.7
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class ScadParams:
    lam: float
    a: float = DEFAULT_A

    def __post_init__(self):
        if self.a <= 2.0:
            raise ValueError("SCAD shape parameter must exceed 2")
        if self.lam < 0.0:
            raise ValueError("lambda must be nonnegative")


def scad_derivative(params: ScadParams, abs_theta):
    """Derivative of the SCAD penalty at |theta|.

    Returns ``lam`` on ``|theta| < lam`` and ``(a*lam - |theta|)_+ / (a - 1)``
    on ``|theta| >= lam``; identically zero when ``lam == 0``.
    """
    abs_theta = np.asarray(abs_theta, dtype=float)
    if np.any(abs_theta < 0):
        raise ValueError("abs_theta must be nonnegative")
    lam, a = params.lam, params.a
    if lam == 0.0:
        out = np.zeros_like(abs_theta)
    else:
        clipped = np.maximum(a * lam - abs_theta, 0.0) / (a - 1.0)
        out = np.where(abs_theta < lam, lam, clipped)
    if out.ndim == 0:
        return float(out)
    return out


def mm_weight(params: ScadParams, abs_theta, epsilon: float = DEFAULT_EPSILON):
    """Surrogate penalty value and ridge coefficient at |theta|.

    Returns ``(q * |theta| / (eps + |theta|), q / (eps + |theta|))`` with
    ``q = scad_derivative(params, |theta|)``.  The second entry is the
    diagonal ridge coefficient of the coordinate-wise update; at zero it
    equals ``lam / eps``, which pins the coordinate.
    """
    abs_theta = np.asarray(abs_theta, dtype=float)
    q = np.asarray(scad_derivative(params, abs_theta))
    ridge = q / (epsilon + abs_theta)
    value = ridge * abs_theta
    if value.ndim == 0:
        return float(value), float(ridge)
    return value, ridge
