"""Pilot-stage penalized fits on the pilot subsample.

Two L1-penalized problems are solved on the pilot index set K_p with expected
size r_p:

* coefficient fit      min (1/r_p) sum_{i in K_p} [b(x_i'beta) - y_i x_i'beta] + lam ||beta||_1
* decorrelation fit    min (1/r_p) sum_{i in K_p} b''(x_i'beta_p) ||z_i - W u_i||^2 + tau ||W||_1

The second problem separates across the d rows of W into independent weighted
lasso regressions (the entrywise L1 sum equals the column-grouped sum for the
plain L1 norm).  All averages normalize by the expected size r_p, not the
realized subsample size.  Solutions carry exact subgradient (KKT)
certificates at tolerance 1e-7.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import ParamSplit
from .errors import (
    ConvergenceError,
    DegenerateInputError,
    DegenerateWeightsError,
    InvalidInputError,
)
from .families import GlmFamily
from .sampling import STREAM_CV_FOLDS, SeedSpec, SubsampleIndex, generator

KKT_TOL = 1e-7
CHANGE_TOL = 1e-9
MAX_SWEEPS = 10_000
IRLS_MAX_OUTER = 100
WEIGHT_FLOOR = 1e-10


@dataclass
class PilotFit:
    """Everything the downstream estimators need from the pilot stage."""

    beta_p: ParamSplit
    W_p: np.ndarray
    lam: float
    tau: float
    dispersion_hat: float
    pilot: SubsampleIndex


def default_penalty(p, r_p):
    """Rate-scale default sqrt(log p / r_p) with unit constant."""
    return math.sqrt(math.log(p) / r_p)


def _pilot_arrays(data, pilot):
    if pilot.size == 0:
        raise DegenerateInputError("empty pilot subsample")
    rows = pilot.rows()
    X = np.asfortranarray(data.X[rows])
    y = data.y[rows]
    return X, y


def fit_lasso_glm(family: GlmFamily, data, pilot: SubsampleIndex, lam) -> ParamSplit:
    """Penalized GLM coefficient fit on the pilot subsample.

    Returns the minimizer to KKT tolerance 1e-7 (max absolute subgradient
    violation of the stated objective).
    """
    if lam < 0:
        raise InvalidInputError("lam must be >= 0")
    X, y = _pilot_arrays(data, pilot)
    m = pilot.r
    beta = np.zeros(data.p)
    if family.kind == "gaussian":
        q = np.full(X.shape[0], 1.0 / m)
        sweeps, resid = kernels.cd_lasso(X, y, q, lam, beta, MAX_SWEEPS, CHANGE_TOL, KKT_TOL)
        if resid > KKT_TOL:
            raise ConvergenceError(
                f"lasso did not reach KKT tolerance ({resid:.3e} > {KKT_TOL:.0e})",
                residual=resid,
            )
        return ParamSplit(beta, data.d)

    # logistic: IRLS outer loop, quadratic model refreshed each pass
    budget = MAX_SWEEPS
    resid = np.inf
    for _ in range(IRLS_MAX_OUTER):
        t = X @ beta
        mu = family.b1(t)
        w = np.maximum(family.b2(t), WEIGHT_FLOOR)
        working = t + (y - mu) / w
        q = w / m
        used, _ = kernels.cd_lasso(X, working, q, lam, beta, budget, CHANGE_TOL, KKT_TOL)
        budget -= used
        resid = lasso_kkt_residual(family, data, pilot, beta, lam)
        if resid <= KKT_TOL:
            return ParamSplit(beta, data.d)
        if budget <= 0:
            break
        if not np.all(np.isfinite(beta)) or np.abs(beta).max() > 1e8:
            raise ConvergenceError("logistic lasso diverged", residual=resid)
    raise ConvergenceError(
        f"logistic lasso did not reach KKT tolerance ({resid:.3e} > {KKT_TOL:.0e})",
        residual=resid,
    )


def lasso_kkt_residual(family: GlmFamily, data, pilot: SubsampleIndex, beta, lam):
    """Max subgradient violation of the coefficient objective at beta."""
    X, y = _pilot_arrays(data, pilot)
    bvec = beta.beta if isinstance(beta, ParamSplit) else np.asarray(beta, dtype=float)
    g = X.T @ (family.b1(X @ bvec) - y) / pilot.r
    viol = np.where(
        bvec > 0,
        np.abs(g + lam),
        np.where(bvec < 0, np.abs(g - lam), np.maximum(np.abs(g) - lam, 0.0)),
    )
    return float(viol.max())


def fit_w_matrix(family: GlmFamily, data, pilot: SubsampleIndex, beta_p: ParamSplit, tau) -> np.ndarray:
    """Decorrelation matrix fit: row k regresses z_k on u with weights b''(x'beta_p)."""
    if tau < 0:
        raise InvalidInputError("tau must be >= 0")
    if not np.all(np.isfinite(beta_p.beta)):
        raise InvalidInputError("beta_p must be finite")
    X, _ = _pilot_arrays(data, pilot)
    d = data.d
    w = family.b2(X @ beta_p.beta)
    if np.all(w < WEIGHT_FLOOR):
        raise DegenerateWeightsError("all b'' weights numerically zero in the W fit")
    U = np.asfortranarray(X[:, d:])
    # kernel objective 0.5*sum q (.)^2 with q = 2w/r_p matches (1/r_p)*sum w (.)^2
    q = 2.0 * w / pilot.r
    W = np.zeros((d, data.p - d))
    for k in range(d):
        g = W[k]
        _, resid = kernels.cd_lasso(U, X[:, k].copy(), q, tau, g, MAX_SWEEPS, CHANGE_TOL, KKT_TOL)
        if resid > KKT_TOL:
            raise ConvergenceError(
                f"W row {k} did not reach KKT tolerance ({resid:.3e})", residual=resid
            )
    return W


def w_kkt_residual(family: GlmFamily, data, pilot: SubsampleIndex, beta_p: ParamSplit, W, tau):
    """Max subgradient violation of the decorrelation objective across rows of W."""
    X, _ = _pilot_arrays(data, pilot)
    d = data.d
    w = family.b2(X @ beta_p.beta)
    U = X[:, d:]
    worst = 0.0
    for k in range(d):
        r = X[:, k] - U @ W[k]
        g = -2.0 * (w * r) @ U / pilot.r
        viol = np.where(
            W[k] > 0,
            np.abs(g + tau),
            np.where(W[k] < 0, np.abs(g - tau), np.maximum(np.abs(g) - tau, 0.0)),
        )
        worst = max(worst, float(viol.max()))
    return worst


def estimate_dispersion(data, beta_p: ParamSplit):
    """Degrees-of-freedom corrected residual variance over the full dataset.

    (1/(n - ||beta_p||_0)) * sum_i (y_i - x_i'beta_p)^2 -- gaussian family only.
    """
    nnz = int(np.count_nonzero(beta_p.beta))
    if nnz >= data.n:
        raise DegenerateInputError("pilot support size must be below n for dispersion")
    resid = data.y - data.X @ beta_p.beta
    return float(resid @ resid / (data.n - nnz))


def _sub_pilot(pilot, keep_rows):
    """Pilot restricted to a subset of its realized rows, with r rescaled."""
    idx = pilot.indices[keep_rows]
    r_scaled = pilot.r * idx.size / pilot.size
    return SubsampleIndex(indices=idx, n=pilot.n, r=r_scaled)


def select_penalties(
    family: GlmFamily,
    data,
    pilot: SubsampleIndex,
    grid_size=20,
    folds=5,
    seed: SeedSpec | None = None,
    lambda_grid=None,
    tau_grid=None,
):
    """K-fold cross-validated (lam, tau) over log-spaced grids.

    Grids default to geomspace factors of 32 around the rate center
    sqrt(log p / r_p); explicit grids (any length) bypass grid_size.  Fold
    assignment is a seed-driven permutation, so the choice is deterministic.
    Ties in the CV criterion resolve to the smallest penalty.
    """
    if lambda_grid is None or tau_grid is None:
        if grid_size < 2:
            raise InvalidInputError("grid_size must be >= 2")
    if pilot.size < 2 * folds:
        raise DegenerateInputError("pilot too small for the requested number of folds")
    center = default_penalty(data.p, pilot.r)
    if lambda_grid is None:
        lambda_grid = np.geomspace(center / 32.0, center * 32.0, grid_size)
    if tau_grid is None:
        tau_grid = np.geomspace(center / 32.0, center * 32.0, grid_size)
    lambda_grid = np.sort(np.asarray(lambda_grid, dtype=float))
    tau_grid = np.sort(np.asarray(tau_grid, dtype=float))

    seed = seed or SeedSpec(0, STREAM_CV_FOLDS)
    perm = generator(seed.with_stream(STREAM_CV_FOLDS)).permutation(pilot.size)
    fold_of = np.empty(pilot.size, dtype=np.int64)
    fold_of[perm] = np.arange(pilot.size) % folds

    d = data.d
    lam_cv = np.zeros(lambda_grid.size)
    for f in range(folds):
        train = _sub_pilot(pilot, fold_of != f)
        val_rows = pilot.rows()[fold_of == f]
        Xv, yv = data.X[val_rows], data.y[val_rows]
        for gi, lam in enumerate(lambda_grid):
            beta = fit_lasso_glm(family, data, train, lam).beta
            t = Xv @ beta
            lam_cv[gi] += float(np.mean(family.b(t) - yv * t))
    lam_best = float(lambda_grid[int(np.argmin(lam_cv))])

    beta_p = fit_lasso_glm(family, data, pilot, lam_best)
    tau_cv = np.zeros(tau_grid.size)
    for f in range(folds):
        train = _sub_pilot(pilot, fold_of != f)
        val_rows = pilot.rows()[fold_of == f]
        Xv = data.X[val_rows]
        wv = family.b2(Xv @ beta_p.beta)
        Uv = Xv[:, d:]
        for gi, tau in enumerate(tau_grid):
            W = fit_w_matrix(family, data, train, beta_p, tau)
            res = Xv[:, :d] - Uv @ W.T
            tau_cv[gi] += float(np.mean(wv[:, None] * res * res))
    tau_best = float(tau_grid[int(np.argmin(tau_cv))])
    return lam_best, tau_best


def fit_pilot(family: GlmFamily, data, pilot: SubsampleIndex, lam=None, tau=None) -> PilotFit:
    """Full pilot stage: coefficient fit, W fit, dispersion.

    lam/tau default to the rate-scale value sqrt(log p / r_p).
    """
    if lam is None:
        lam = default_penalty(data.p, pilot.r)
    if tau is None:
        tau = default_penalty(data.p, pilot.r)
    beta_p = fit_lasso_glm(family, data, pilot, lam)
    W_p = fit_w_matrix(family, data, pilot, beta_p, tau)
    if family.dispersion_known:
        dispersion = 1.0
    else:
        dispersion = estimate_dispersion(data, beta_p)
    return PilotFit(beta_p=beta_p, W_p=W_p, lam=float(lam), tau=float(tau),
                    dispersion_hat=dispersion, pilot=pilot)
