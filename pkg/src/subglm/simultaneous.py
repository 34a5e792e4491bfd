"""Simultaneous inference for a diverging interest dimension.

Pipeline: a symmetric pilot moment matrix Phi_check, a row-wise constrained
L1 program for an inverse-Hessian surrogate G, a debiased estimate

    theta_check = theta_p - G (1/n) sum_i (b'(x_i'beta_p) - y_i)(z_i - W_p u_i),

and a multiplier bootstrap for the sup-norm quantile: draw k records

    || (1/sqrt(n)) sum_i e_{k,i} a_i ||_inf,    a_i = G (b'(.) - y_i)(z_i - W_p u_i),

with standard normal multipliers e_{k,i}; the studentized variant rescales
a_i by diag(G)^{-1/2}.  Intervals have constant half-width c_n(1-alpha)/sqrt(n)
(plain) or g_ii^{1/2} c_n^stu(1-alpha)/sqrt(n) (studentized).
"""

import math
from dataclasses import dataclass

import numpy as np

from .dvs import CiSet, order_statistic_quantile
from .errors import (
    InfeasibleProgramError,
    InvalidInputError,
    StudentizationError,
)
from .lasso import PilotFit
from .sampling import STREAM_BOOTSTRAP_BASE, SeedSpec, generator
from .simplex import solve_lp

GAMMA_DOUBLINGS = 10


@dataclass
class ClimeSolution:
    """Symmetrized inverse-Hessian surrogate with its feasibility certificates.

    ``feasibility_residual`` is ||G_raw Phi - I||_inf of the raw row-wise
    solution (certified <= gamma_n); symmetrization can degrade feasibility,
    so the post-symmetrization residual is recorded separately and compared
    against the relaxed level 2 * gamma_n (recorded, not enforced).
    """

    G: np.ndarray
    G_raw: np.ndarray
    gamma_n: float
    feasibility_residual: float
    sym_feasibility_residual: float
    sym_within_relaxed: bool
    row_l1: np.ndarray


@dataclass
class BootstrapQuantiles:
    """Sup-norm bootstrap draws and the quantile at the requested level."""

    draws: np.ndarray
    c_alpha: float
    studentized: bool
    B: int
    level: float

    def quantile_at(self, q):
        return order_statistic_quantile(self.draws, q)


def phi_check_pilot(family, data, pilot: PilotFit):
    """Symmetric covariance-type pilot moment (1/r_p) sum b''(x'beta_p)(z - Wu)(z - Wu)'."""
    idx = pilot.pilot
    rows = idx.rows()
    d = data.d
    zw = data.X[rows, :d] - data.X[rows, d:] @ pilot.W_p.T
    b2 = family.b2(data.X[rows] @ pilot.beta_p.beta)
    Phi = (zw * b2[:, None]).T @ zw / idx.r
    return 0.5 * (Phi + Phi.T)


def _symmetrize(G):
    """Keep the smaller-magnitude entry of each (i, j)/(j, i) pair.

    Exact-magnitude ties with differing values take the upper-triangle entry
    so the result is symmetric by construction.
    """
    d = G.shape[0]
    out = G.copy()
    for i in range(d):
        for j in range(i + 1, d):
            a, b = G[i, j], G[j, i]
            pick = a if abs(a) <= abs(b) else b
            out[i, j] = pick
            out[j, i] = pick
    return out


def clime_solve(Phi_check, gamma_n) -> ClimeSolution:
    """Row-wise constrained L1 inverse estimation, then symmetrization.

    Row i solves  min ||g||_1  s.t.  ||Phi g - e_i||_inf <= gamma_n  as a
    linear program on the split g = g+ - g-, solved by the dense simplex.
    """
    Phi = np.asarray(Phi_check, dtype=float)
    if gamma_n < 0:
        raise InvalidInputError("gamma_n must be >= 0")
    d = Phi.shape[0]
    A = np.vstack([np.hstack([Phi, -Phi]), np.hstack([-Phi, Phi])])
    cost = np.ones(2 * d)
    G = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        b = np.concatenate([gamma_n + e, gamma_n - e])
        try:
            res = solve_lp(cost, A, b)
        except InfeasibleProgramError as exc:
            raise InfeasibleProgramError(
                f"row {i} of the constrained inverse program is infeasible "
                f"at gamma_n={gamma_n:.4g}", row=i
            ) from exc
        G[i] = res.x[:d] - res.x[d:]
    feas = float(np.abs(G @ Phi - np.eye(d)).max())
    G_sym = _symmetrize(G)
    sym_feas = float(np.abs(G_sym @ Phi - np.eye(d)).max())
    return ClimeSolution(
        G=G_sym,
        G_raw=G,
        gamma_n=float(gamma_n),
        feasibility_residual=feas,
        sym_feasibility_residual=sym_feas,
        sym_within_relaxed=bool(sym_feas <= 2.0 * gamma_n + 1e-9),
        row_l1=np.abs(G_sym).sum(axis=1),
    )


def default_gamma_n(p, r_p, scale=0.5):
    """Rate-scale default for the constraint level: scale * sqrt(log p / r_p)."""
    return scale * math.sqrt(math.log(p) / r_p)


def clime_solve_auto(Phi_check, gamma_n) -> ClimeSolution:
    """clime_solve with up to 10 doublings of gamma_n on infeasibility."""
    g = float(gamma_n)
    last_exc = None
    for _ in range(GAMMA_DOUBLINGS + 1):
        try:
            return clime_solve(Phi_check, g)
        except InfeasibleProgramError as exc:
            last_exc = exc
            g *= 2.0
    raise last_exc


def _score_terms(family, data, pilot: PilotFit):
    d = data.d
    zw = data.z - data.u @ pilot.W_p.T
    resid = family.b1(data.X @ pilot.beta_p.beta) - data.y
    return resid[:, None] * zw


def debiased_estimate(family, data, pilot: PilotFit, G):
    """Debiasing correction of theta_p with the full-data score."""
    G = np.asarray(G, dtype=float)
    if not np.all(np.isfinite(G)):
        raise InvalidInputError("G must be finite")
    s = _score_terms(family, data, pilot).mean(axis=0)
    return pilot.beta_p.theta - G @ s


def multiplier_bootstrap(
    family, data, pilot: PilotFit, G, B, studentized, seed: SeedSpec,
    alpha=0.05, workers=1,
) -> BootstrapQuantiles:
    """Sup-norm multiplier bootstrap with per-draw derived streams.

    Draw k uses multipliers from stream (master_seed, 1000 + k), so the draw
    set is identical however the draws are partitioned across workers.
    """
    if B < 100:
        raise InvalidInputError("B must be >= 100")
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError("alpha must lie in (0, 1)")
    G = np.asarray(G, dtype=float)
    a = _score_terms(family, data, pilot) @ G.T
    if studentized:
        diag = np.diag(G)
        if np.any(diag <= 0.0):
            raise StudentizationError("studentized bootstrap needs positive diag(G)")
        a = a / np.sqrt(diag)
    n = data.n
    scale = 1.0 / math.sqrt(n)

    def one_draw(k):
        e = generator(seed.with_stream(STREAM_BOOTSTRAP_BASE + k)).standard_normal(n)
        return float(np.abs(scale * (e @ a)).max())

    draws = np.empty(B)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for k, val in enumerate(pool.map(one_draw, range(1, B + 1))):
                draws[k] = val
    else:
        for k in range(1, B + 1):
            draws[k - 1] = one_draw(k)
    c_alpha = order_statistic_quantile(draws, 1.0 - alpha)
    return BootstrapQuantiles(draws=draws, c_alpha=c_alpha, studentized=bool(studentized),
                              B=int(B), level=float(alpha))


def simultaneous_confidence_intervals(
    theta_check, quantiles: BootstrapQuantiles, G, n, alpha
) -> CiSet:
    """Simultaneous intervals from the bootstrap sup-norm quantile."""
    if abs(quantiles.level - alpha) > 1e-12:
        raise InvalidInputError("bootstrap quantiles were computed at a different level")
    theta_check = np.asarray(theta_check, dtype=float)
    c = quantiles.c_alpha
    if quantiles.studentized:
        half = np.sqrt(np.diag(np.asarray(G, dtype=float))) * c / math.sqrt(n)
        method = "simultaneous_boot_studentized"
    else:
        half = np.full(theta_check.size, c / math.sqrt(n))
        method = "simultaneous_boot"
    return CiSet(estimates=theta_check.copy(), lower=theta_check - half,
                 upper=theta_check + half, level=1.0 - alpha, method=method)
