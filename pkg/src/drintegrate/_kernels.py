"""Numba inner loops of the coordinate-wise penalized solver.

Each coordinate visit fits the epsilon-perturbed surrogate of the local
linearized estimating equation to its fixed point (cheap scalar
iteration of the Newton-plus-ridge update), then accepts the move with
step-halving against the exact estimating function.  Score vectors are
cached and refreshed only after an accepted move.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_MAXCYCLES = 1
STATUS_DIVERGED = 2


@njit(cache=True)
def _expit_clip(t, clip):
    if t >= 0.0:
        s = 1.0 / (1.0 + np.exp(-t))
    else:
        e = np.exp(t)
        s = e / (1.0 + e)
    if s < clip:
        s = clip
    return s


@njit(cache=True)
def _scad_q(lam, a, absv):
    if lam <= 0.0:
        return 0.0
    if absv < lam:
        return lam
    rest = a * lam - absv
    if rest < 0.0:
        rest = 0.0
    return rest / (a - 1.0)


@njit(cache=True)
def _inner_root(uj, gj, th, lam, a, eps, penalized, max_step):
    """Fixed point of the ridge update for the local model U ~ uj + gj*d."""
    d = 0.0
    for _ in range(500):
        absv = abs(th + d)
        if penalized:
            q = _scad_q(lam, a, absv)
            e = q / (eps + absv)
        else:
            e = 0.0
        denom = e - gj
        if denom <= 0.0:
            break
        step = (uj + gj * d - e * (th + d)) / denom
        if step > max_step:
            step = max_step
        elif step < -max_step:
            step = -max_step
        d += step
        if abs(step) < 1e-13:
            break
    total = th + d
    if total > 0 and total - th > max_step:
        d = max_step
    elif th - total > max_step:
        d = -max_step
    return d


@njit(cache=True)
def _solve_gauss(a, b):
    """Gaussian elimination with partial pivoting; returns success flag."""
    k = a.shape[0]
    for col in range(k):
        piv = col
        best = abs(a[col, col])
        for r in range(col + 1, k):
            if abs(a[r, col]) > best:
                best = abs(a[r, col])
                piv = r
        if best < 1e-300:
            return False
        if piv != col:
            for c in range(k):
                tmp = a[col, c]
                a[col, c] = a[piv, c]
                a[piv, c] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        for r in range(col + 1, k):
            factor = a[r, col] / a[col, col]
            if factor != 0.0:
                for c in range(col, k):
                    a[r, c] -= factor * a[col, c]
                b[r] -= factor * b[col]
    for col in range(k - 1, -1, -1):
        acc = b[col]
        for c in range(col + 1, k):
            acc -= a[col, c] * b[c]
        b[col] = acc / a[col, col]
    return True


@njit(cache=True)
def cd_alpha(xb, xb2, a_colsum, n_pop, lam, a_scad, eps, clip,
             penalize_intercept, max_cycles, tol, max_step, max_halv,
             bound, theta):
    """Coordinate cycling for the sampling-score block; theta is in/out.

    Returns (cycles, status, last_max_delta).
    """
    n, p = xb.shape
    t = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(p):
            acc += xb[i, j] * theta[j]
        t[i] = acc
    inv = np.empty(n)
    w1 = np.empty(n)
    for i in range(n):
        s = _expit_clip(t[i], clip)
        inv[i] = 1.0 / s
        w1[i] = (1.0 - s) * inv[i]

    maxd = 1.0
    prev_maxd = 1e300
    cycles = 0
    t_try = np.empty(n)
    inv_try = np.empty(n)
    w1_try = np.empty(n)
    for cycles in range(1, max_cycles + 1):
        maxd = 0.0
        for j in range(p):
            uj = -a_colsum[j]
            gj = 0.0
            for i in range(n):
                uj += xb[i, j] * inv[i]
                gj -= xb2[i, j] * w1[i]
            uj /= n_pop
            gj /= n_pop
            penalized = penalize_intercept or j > 0
            d = _inner_root(uj, gj, theta[j], lam, a_scad, eps, penalized, max_step)
            if d == 0.0:
                continue
            if abs(d) < 1e-13:
                theta[j] += d
                continue
            absv = abs(theta[j])
            if penalized:
                e0 = _scad_q(lam, a_scad, absv) / (eps + absv)
            else:
                e0 = 0.0
            f0 = abs(uj - e0 * theta[j])
            for _ in range(max_halv):
                u_new = -a_colsum[j]
                for i in range(n):
                    t_try[i] = t[i] + xb[i, j] * d
                    s = _expit_clip(t_try[i], clip)
                    inv_try[i] = 1.0 / s
                    w1_try[i] = (1.0 - s) * inv_try[i]
                    u_new += xb[i, j] * inv_try[i]
                u_new /= n_pop
                absv = abs(theta[j] + d)
                if penalized:
                    e_new = _scad_q(lam, a_scad, absv) / (eps + absv)
                else:
                    e_new = 0.0
                if abs(u_new - e_new * (theta[j] + d)) <= f0 * (1.0 + 1e-12):
                    break
                d *= 0.5
            theta[j] += d
            for i in range(n):
                t[i] = t_try[i]
                inv[i] = inv_try[i]
                w1[i] = w1_try[i]
            if abs(theta[j]) > bound:
                return cycles, STATUS_DIVERGED, maxd
            if abs(d) > maxd:
                maxd = abs(d)
        if maxd < tol:
            return cycles, STATUS_OK, maxd
        if maxd < 5e-2 and maxd > 0.3 * prev_maxd:
            # sweeps are contracting slowly: take a joint ridge-Newton
            # polish step on the unpinned coordinates; the sweep above
            # remains the sole judge of convergence
            act = np.empty(p, dtype=np.int64)
            k = 0
            for j in range(p):
                unpen = j == 0 and not penalize_intercept
                if unpen or abs(theta[j]) > 100.0 * eps:
                    act[k] = j
                    k += 1
            if k == 0:
                prev_maxd = maxd
                continue
            xact = np.empty((n, k))
            for r in range(k):
                for i in range(n):
                    xact[i, r] = xb[i, act[r]]
            xw = np.empty((n, k))
            for r in range(k):
                for i in range(n):
                    xw[i, r] = xact[i, r] * w1[i]
            amat = np.dot(xact.T, xw) / n_pop  # minus the Jacobian block
            uvec = np.dot(xact.T, inv)
            rhs = np.empty(k)
            for r in range(k):
                j = act[r]
                uj = (uvec[r] - a_colsum[j]) / n_pop
                if j == 0 and not penalize_intercept:
                    e0 = 0.0
                else:
                    absv = abs(theta[j])
                    e0 = _scad_q(lam, a_scad, absv) / (eps + absv)
                rhs[r] = uj - e0 * theta[j]
                amat[r, r] += e0
            f0 = 0.0
            for r in range(k):
                if abs(rhs[r]) > f0:
                    f0 = abs(rhs[r])
            delta = rhs.copy()
            if _solve_gauss(amat, delta):
                scalef = 1.0
                for _ in range(4):
                    for i in range(n):
                        acc = t[i]
                        for r in range(k):
                            acc += xact[i, r] * delta[r] * scalef
                        t_try[i] = acc
                        s = _expit_clip(t_try[i], clip)
                        inv_try[i] = 1.0 / s
                        w1_try[i] = (1.0 - s) * inv_try[i]
                    uvec = np.dot(xact.T, inv_try)
                    f_new = 0.0
                    for r in range(k):
                        j = act[r]
                        uj = (uvec[r] - a_colsum[j]) / n_pop
                        thn = theta[j] + delta[r] * scalef
                        if j == 0 and not penalize_intercept:
                            e_new = 0.0
                        else:
                            absv = abs(thn)
                            e_new = _scad_q(lam, a_scad, absv) / (eps + absv)
                        resid = abs(uj - e_new * thn)
                        if resid > f_new:
                            f_new = resid
                    if f_new <= f0 * (1.0 - 1e-4):
                        for r in range(k):
                            theta[act[r]] += delta[r] * scalef
                        for i in range(n):
                            t[i] = t_try[i]
                            inv[i] = inv_try[i]
                            w1[i] = w1_try[i]
                        break
                    scalef *= 0.5
        prev_maxd = maxd
    return max_cycles, STATUS_MAXCYCLES, maxd


@njit(cache=True)
def cd_beta(xb, xb2, y, identity, n_pop, lam, a_scad, eps,
            penalize_intercept, max_cycles, tol, max_step, max_halv,
            bound, theta):
    """Coordinate cycling for the outcome block; theta is in/out.

    The curvature uses the squared first derivative of the link, as in
    the printed update formula (coincides with the literal derivative
    only for the identity link).
    """
    n, p = xb.shape
    t = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(p):
            acc += xb[i, j] * theta[j]
        t[i] = acc
    resid = np.empty(n)
    curv = np.empty(n)  # m'(t)^2
    for i in range(n):
        if identity:
            resid[i] = y[i] - t[i]
            curv[i] = 1.0
        else:
            m = _expit_clip(t[i], 0.0)
            resid[i] = y[i] - m
            d1 = m * (1.0 - m)
            curv[i] = d1 * d1

    maxd = 1.0
    prev_maxd = 1e300
    cycles = 0
    t_try = np.empty(n)
    resid_try = np.empty(n)
    curv_try = np.empty(n)
    for cycles in range(1, max_cycles + 1):
        maxd = 0.0
        for j in range(p):
            uj = 0.0
            gj = 0.0
            for i in range(n):
                uj += xb[i, j] * resid[i]
                gj -= xb2[i, j] * curv[i]
            uj /= n_pop
            gj /= n_pop
            penalized = penalize_intercept or j > 0
            d = _inner_root(uj, gj, theta[j], lam, a_scad, eps, penalized, max_step)
            if d == 0.0:
                continue
            if abs(d) < 1e-13:
                theta[j] += d
                continue
            absv = abs(theta[j])
            if penalized:
                e0 = _scad_q(lam, a_scad, absv) / (eps + absv)
            else:
                e0 = 0.0
            f0 = abs(uj - e0 * theta[j])
            for _ in range(max_halv):
                u_new = 0.0
                for i in range(n):
                    t_try[i] = t[i] + xb[i, j] * d
                    if identity:
                        resid_try[i] = y[i] - t_try[i]
                        curv_try[i] = 1.0
                    else:
                        m = _expit_clip(t_try[i], 0.0)
                        resid_try[i] = y[i] - m
                        d1 = m * (1.0 - m)
                        curv_try[i] = d1 * d1
                    u_new += xb[i, j] * resid_try[i]
                u_new /= n_pop
                absv = abs(theta[j] + d)
                if penalized:
                    e_new = _scad_q(lam, a_scad, absv) / (eps + absv)
                else:
                    e_new = 0.0
                if abs(u_new - e_new * (theta[j] + d)) <= f0 * (1.0 + 1e-12):
                    break
                d *= 0.5
            theta[j] += d
            for i in range(n):
                t[i] = t_try[i]
                resid[i] = resid_try[i]
                curv[i] = curv_try[i]
            if abs(theta[j]) > bound:
                return cycles, STATUS_DIVERGED, maxd
            if abs(d) > maxd:
                maxd = abs(d)
        if maxd < tol:
            return cycles, STATUS_OK, maxd
        if maxd < 5e-2 and maxd > 0.3 * prev_maxd:
            # slow contraction: joint ridge-Newton polish as above
            act = np.empty(p, dtype=np.int64)
            k = 0
            for j in range(p):
                unpen = j == 0 and not penalize_intercept
                if unpen or abs(theta[j]) > 100.0 * eps:
                    act[k] = j
                    k += 1
            if k == 0:
                prev_maxd = maxd
                continue
            xact = np.empty((n, k))
            for r in range(k):
                for i in range(n):
                    xact[i, r] = xb[i, act[r]]
            xw = np.empty((n, k))
            for r in range(k):
                for i in range(n):
                    # polish direction uses the literal curvature m'(t);
                    # curv stores m'(t)^2, so take the square root
                    xw[i, r] = xact[i, r] * np.sqrt(curv[i])
            amat = np.dot(xact.T, xw) / n_pop  # minus the Jacobian block
            uvec = np.dot(xact.T, resid)
            rhs = np.empty(k)
            for r in range(k):
                j = act[r]
                uj = uvec[r] / n_pop
                if j == 0 and not penalize_intercept:
                    e0 = 0.0
                else:
                    absv = abs(theta[j])
                    e0 = _scad_q(lam, a_scad, absv) / (eps + absv)
                rhs[r] = uj - e0 * theta[j]
                amat[r, r] += e0
            f0 = 0.0
            for r in range(k):
                if abs(rhs[r]) > f0:
                    f0 = abs(rhs[r])
            delta = rhs.copy()
            if _solve_gauss(amat, delta):
                scalef = 1.0
                for _ in range(4):
                    for i in range(n):
                        acc = t[i]
                        for r in range(k):
                            acc += xact[i, r] * delta[r] * scalef
                        t_try[i] = acc
                        if identity:
                            resid_try[i] = y[i] - t_try[i]
                            curv_try[i] = 1.0
                        else:
                            m = _expit_clip(t_try[i], 0.0)
                            resid_try[i] = y[i] - m
                            d1 = m * (1.0 - m)
                            curv_try[i] = d1 * d1
                    uvec = np.dot(xact.T, resid_try)
                    f_new = 0.0
                    for r in range(k):
                        j = act[r]
                        uj = uvec[r] / n_pop
                        thn = theta[j] + delta[r] * scalef
                        if j == 0 and not penalize_intercept:
                            e_new = 0.0
                        else:
                            absv = abs(thn)
                            e_new = _scad_q(lam, a_scad, absv) / (eps + absv)
                        rj = abs(uj - e_new * thn)
                        if rj > f_new:
                            f_new = rj
                    if f_new <= f0 * (1.0 - 1e-4):
                        for r in range(k):
                            theta[act[r]] += delta[r] * scalef
                        for i in range(n):
                            t[i] = t_try[i]
                            resid[i] = resid_try[i]
                            curv[i] = curv_try[i]
                        break
                    scalef *= 0.5
        prev_maxd = maxd
    return max_cycles, STATUS_MAXCYCLES, maxd
