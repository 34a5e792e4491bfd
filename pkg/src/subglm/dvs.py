"""De-variance subsampling estimator and its Monte-Carlo confidence intervals.

The point estimate corrects the subsampled-score root theta_uni with one
Newton step whose Jacobian comes from the subsample but whose score comes
from the FULL data (the asymmetry is deliberate):

    theta_tilde = theta_uni - J_sub(theta_uni)^{-1} S_full(theta_uni)

Scaled by min{sqrt(n), r}, the estimation error converges to h(U) with U a
(d^2 + 2d)-dimensional normal whose covariance V has the block structure

    V11 = V22 = c(sigma0) * Phi,   V12 = sqrt(r/n) V11,
    V13 = V23 = 0,                 V33 = (1 - r/n) E[(b'')^2 vec(.) vec(.)'],

and

    h(U) = 0.5 m2 Phi^{-1} T ((Phi^{-1}U1) kron (Phi^{-1}U1))
           - m1 Phi^{-1} U2 - m2 Phi^{-1} U3 Phi^{-1} U1,

with m1 = min{sqrt(n), r}/sqrt(n) and m2 = min{sqrt(n), r}/r.  Confidence
intervals take empirical quantiles of h over Monte-Carlo draws of U.

vec(.) is row-major throughout: row j of T is the row-major vec of the
moment matrix E[b''' (z_j - W_j u) z z'], and the last d^2 entries of U
reshape row-major to the d x d matrix U3.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    DimensionCapError,
    InvalidCovarianceError,
    InvalidInputError,
)
from .lasso import PilotFit
from .sampling import STREAM_MONTE_CARLO, SeedSpec, normal_block
from .score import ScoreContext, check_conditioning, score, score_jacobian_theta

EIGENVALUE_FLOOR = 1e-8
DIMENSION_CAP = 400
DEFAULT_MC_DRAWS = 10_000


@dataclass
class CiSet:
    """Per-coordinate estimates with interval bounds; common CI output type."""

    estimates: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    method: str

    def widths(self):
        return self.upper - self.lower

    def covers(self, truth):
        truth = np.asarray(truth, dtype=float)
        return (self.lower <= truth) & (truth <= self.upper)


def order_statistic_quantile(values, q):
    """Lower empirical order statistic ceil(q * m), no interpolation.

    Shared quantile convention for the Monte-Carlo and bootstrap paths;
    monotone in q by construction.
    """
    v = np.sort(np.asarray(values))
    m = v.size
    k = max(int(math.ceil(q * m)), 1)
    return float(v[min(k, m) - 1])


@dataclass
class AsymptoticModel:
    """Plug-in estimates of (Phi, T, V) plus the regime scale factors m1, m2."""

    Phi_hat: np.ndarray
    T_hat: np.ndarray
    V_hat: np.ndarray
    m1: float
    m2: float
    r: float
    n: int
    dispersion: float

    @property
    def d(self):
        return self.Phi_hat.shape[0]

    @property
    def scale(self):
        """min{sqrt(n), r}: the convergence-rate normalization."""
        return min(math.sqrt(self.n), self.r)


def dvs_estimate(ctx: ScoreContext, theta_uni, data=None):
    """One-step correction: subsample Jacobian, full-data score."""
    if not ctx.is_subsample:
        raise InvalidInputError("dvs_estimate needs a subsample-mode context")
    theta_uni = np.asarray(theta_uni, dtype=float)
    J = score_jacobian_theta(ctx, theta_uni)
    check_conditioning(J, "subsample Jacobian")
    full_ctx = ctx.as_full() if data is None or data is ctx.data else ScoreContext(
        ctx.family, data, ctx.gamma, ctx.W, None
    )
    s_full = score(full_ctx, theta_uni)
    return theta_uni - np.linalg.solve(J, s_full)


def estimate_asymptotic_model(
    family, data, pilot: PilotFit, theta_plug, r, n, cap=DIMENSION_CAP
) -> AsymptoticModel:
    """Plug-in moments over the pilot subsample at (theta_plug, gamma_p, W_p).

    Phi is estimated in its symmetric covariance form (the form appearing in
    the V11 block), which keeps V positive semidefinite by construction; the
    population versions of the two Phi forms coincide.
    """
    idx = pilot.pilot
    if idx.size == 0:
        raise DegenerateInputError("empty pilot subsample")
    d = data.d
    dim = d * d + 2 * d
    if dim > cap:
        raise DimensionCapError(
            f"Monte-Carlo dimension d^2 + 2d = {dim} exceeds cap {cap}; "
            "use the multistep or simultaneous procedures for large d"
        )
    theta_plug = np.asarray(theta_plug, dtype=float)
    rows = idx.rows()
    Z = data.X[rows, :d]
    U = data.X[rows, d:]
    zw = Z - U @ pilot.W_p.T
    t = Z @ theta_plug + U @ pilot.beta_p.gamma
    b2 = family.b2(t)
    b3 = family.b3(t)
    m = idx.r

    Phi = (zw * b2[:, None]).T @ zw / m
    Phi = 0.5 * (Phi + Phi.T)  # exact symmetry against fp round-off

    # T: row j = row-major vec of (1/m) sum b''' zw_j z z'
    T_mats = np.einsum("i,ij,ik,il->jkl", b3, zw, Z, Z) / m
    T_hat = T_mats.reshape(d, d * d)

    c = pilot.dispersion_hat
    V11 = c * Phi
    rho = math.sqrt(r / n)
    P = np.einsum("ij,ik->ijk", zw, Z).reshape(zw.shape[0], d * d)
    V33 = (1.0 - r / n) * (P * (b2 * b2)[:, None]).T @ P / m

    V = np.zeros((dim, dim))
    V[:d, :d] = V11
    V[d:2 * d, d:2 * d] = V11
    V[:d, d:2 * d] = rho * V11
    V[d:2 * d, :d] = rho * V11
    V[2 * d:, 2 * d:] = V33

    root_n = math.sqrt(n)
    m1 = min(root_n, r) / root_n
    m2 = min(root_n, r) / r
    return AsymptoticModel(
        Phi_hat=Phi, T_hat=T_hat, V_hat=V, m1=m1, m2=m2, r=float(r), n=int(n), dispersion=c
    )


def h_transform(model: AsymptoticModel, U):
    """Evaluate h at one U vector (d^2 + 2d,) or a batch (m, d^2 + 2d)."""
    d = model.d
    U = np.asarray(U, dtype=float)
    single = U.ndim == 1
    Ub = U[None, :] if single else U
    if Ub.shape[1] != d * d + 2 * d:
        raise InvalidInputError("U has the wrong dimension")
    check_conditioning(model.Phi_hat, "Phi_hat")
    A = np.linalg.inv(model.Phi_hat)
    a = Ub[:, :d] @ A.T                      # rows: Phi^{-1} U1
    T_mats = model.T_hat.reshape(d, d, d)
    quad = np.einsum("rk,jkl,rl->rj", a, T_mats, a)
    U3 = Ub[:, 2 * d:].reshape(-1, d, d)     # row-major reshape
    cross = np.einsum("rkl,rl->rk", U3, a) @ A.T
    h = 0.5 * model.m2 * (quad @ A.T) - model.m1 * (Ub[:, d:2 * d] @ A.T) - model.m2 * cross
    return h[0] if single else h


def _psd_root(V):
    vals, vecs = np.linalg.eigh(0.5 * (V + V.T))
    floor = -EIGENVALUE_FLOOR * max(np.trace(V), 0.0)
    if vals.min() < floor:
        raise InvalidCovarianceError(
            f"V_hat eigenvalue {vals.min():.3e} below the floor {floor:.3e}"
        )
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def dvs_confidence_intervals(
    model: AsymptoticModel, theta_tilde, alpha, r_m=DEFAULT_MC_DRAWS, seed: SeedSpec | None = None
) -> CiSet:
    """Monte-Carlo intervals [theta - h_U/scale, theta - h_L/scale].

    Draws r_m samples from N(0, V_hat) through a PSD square root (negative
    eigenvalues within the floor clipped to zero) on the dedicated
    Monte-Carlo stream; draw k occupies stream positions [k*dim, (k+1)*dim),
    so worker partitions by draw index reproduce the serial draw set.
    """
    if r_m < 100:
        raise InvalidInputError("r_m must be >= 100")
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError("alpha must lie in (0, 1)")
    theta_tilde = np.asarray(theta_tilde, dtype=float)
    seed = seed or SeedSpec(0, STREAM_MONTE_CARLO)
    root = _psd_root(model.V_hat)
    dim = model.V_hat.shape[0]
    N = normal_block(seed.with_stream(STREAM_MONTE_CARLO), 0, r_m * dim).reshape(r_m, dim)
    draws = h_transform(model, N @ root.T)
    scale = model.scale
    d = model.d
    lower = np.empty(d)
    upper = np.empty(d)
    for j in range(d):
        h_l = order_statistic_quantile(draws[:, j], alpha / 2.0)
        h_u = order_statistic_quantile(draws[:, j], 1.0 - alpha / 2.0)
        lower[j] = theta_tilde[j] - h_u / scale
        upper[j] = theta_tilde[j] - h_l / scale
    return CiSet(estimates=theta_tilde.copy(), lower=lower, upper=upper,
                 level=1.0 - alpha, method="dvs_mc")
