"""Small dense linear-algebra kernel and overflow-safe scalar maps.

Systems solved here are tiny (at most ``2p x 2p`` with ``p`` around 50),
so a plain LU factorization with partial pivoting is all that is needed.
"""

from __future__ import annotations

import numpy as np


class SingularMatrix(Exception):
    """Raised when elimination hits a pivot that is numerically zero."""


def solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` by Gaussian elimination with partial pivoting.

    Parameters
    ----------
    a : (n, n) array
    b : (n,) array

    Raises
    ------
    SingularMatrix
        If a pivot magnitude falls below ``1e-12`` times the largest
        entry of the original matrix.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    if b.shape != (n,):
        raise ValueError("right-hand side has wrong length")

    pivot_floor = 1e-12 * max(np.abs(a).max(), 1e-300)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[piv, k]) < pivot_floor:
            raise SingularMatrix(f"pivot {a[piv, k]!r} at column {k}")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        factors = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(factors, a[k, k:])
        b[k + 1:] -= factors * b[k]

    x = np.empty(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def expit(t):
    """Logistic function computed without overflow; accepts scalars or arrays.

    Uses the identity ``expit(t) = exp(t) / (1 + exp(t))`` on the negative
    branch so the exponential argument is never positive.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    if out.ndim == 0:
        return float(out)
    return out
