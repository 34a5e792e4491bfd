"""JIT-compiled hot kernels (coordinate-descent inner loops).

Same contract as ``_kernels_numpy``; selected at import time by
``subglm.kernels`` unless SUBGLM_DISABLE_NUMBA is set.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _kkt_residual(X, q, r, beta, lam):
    n, p = X.shape
    worst = 0.0
    for j in range(p):
        g = 0.0
        for i in range(n):
            g -= q[i] * X[i, j] * r[i]
        if beta[j] > 0.0:
            v = abs(g + lam)
        elif beta[j] < 0.0:
            v = abs(g - lam)
        else:
            v = abs(g) - lam
            if v < 0.0:
                v = 0.0
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def cd_lasso(X, y, q, lam, beta, max_sweeps, change_tol, kkt_tol):
    """Cyclic coordinate descent on 0.5 * sum_i q_i (y_i - x_i'beta)^2 + lam * ||beta||_1.

    X must be Fortran-ordered; beta is updated in place.  Sweeps continue
    until the max coordinate change drops below change_tol and the exact
    subgradient residual is below kkt_tol, or max_sweeps is exhausted.
    Returns (sweeps_used, kkt_residual).
    """
    n, p = X.shape
    a = np.zeros(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += q[i] * X[i, j] * X[i, j]
        a[j] = s
        if s <= 0.0 and beta[j] != 0.0:
            beta[j] = 0.0
    r = y.copy()
    for j in range(p):
        if beta[j] != 0.0:
            for i in range(n):
                r[i] -= beta[j] * X[i, j]
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        max_change = 0.0
        for j in range(p):
            if a[j] <= 0.0:
                continue
            c = a[j] * beta[j]
            for i in range(n):
                c += q[i] * X[i, j] * r[i]
            if c > lam:
                nb = (c - lam) / a[j]
            elif c < -lam:
                nb = (c + lam) / a[j]
            else:
                nb = 0.0
            d = nb - beta[j]
            if d != 0.0:
                beta[j] = nb
                for i in range(n):
                    r[i] -= d * X[i, j]
                ad = abs(d)
                if ad > max_change:
                    max_change = ad
        if max_change < change_tol:
            resid = _kkt_residual(X, q, r, beta, lam)
            if resid <= kkt_tol:
                return sweeps, resid
    return sweeps, _kkt_residual(X, q, r, beta, lam)


def warm_up():
    """Trigger compilation (cached on disk) so forked workers inherit it."""
    X = np.asfortranarray(np.eye(3))
    beta = np.zeros(3)
    cd_lasso(X, np.ones(3), np.full(3, 1.0 / 3), 0.1, beta, 10, 1e-9, 1e-7)
