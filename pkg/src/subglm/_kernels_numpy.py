"""Pure-numpy fallback for the hot kernels.

Mirrors ``_kernels_numba`` coordinate for coordinate (same cyclic update
order, same stopping logic) so both paths land on the same certificate; only
floating-point summation order differs.
"""

import numpy as np


def _kkt_residual(X, q, r, beta, lam):
    g = -(q * r) @ X
    viol = np.where(
        beta > 0.0,
        np.abs(g + lam),
        np.where(beta < 0.0, np.abs(g - lam), np.maximum(np.abs(g) - lam, 0.0)),
    )
    return float(viol.max()) if viol.size else 0.0


def cd_lasso(X, y, q, lam, beta, max_sweeps, change_tol, kkt_tol):
    """See ``_kernels_numba.cd_lasso``; identical contract."""
    n, p = X.shape
    Xq = X * q[:, None]
    a = np.einsum("ij,ij->j", Xq, X)
    beta[a <= 0.0] = 0.0
    r = y - X @ beta
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        max_change = 0.0
        for j in range(p):
            if a[j] <= 0.0:
                continue
            c = a[j] * beta[j] + Xq[:, j] @ r
            if c > lam:
                nb = (c - lam) / a[j]
            elif c < -lam:
                nb = (c + lam) / a[j]
            else:
                nb = 0.0
            d = nb - beta[j]
            if d != 0.0:
                beta[j] = nb
                r -= d * X[:, j]
                ad = abs(d)
                if ad > max_change:
                    max_change = ad
        if max_change < change_tol:
            resid = _kkt_residual(X, q, r, beta, lam)
            if resid <= kkt_tol:
                return sweeps, resid
    return sweeps, _kkt_residual(X, q, r, beta, lam)


def warm_up():
    """No compilation needed; present for interface parity."""
