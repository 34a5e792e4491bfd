"""Multi-step estimator: full-data score corrections with a frozen pilot Jacobian.

Starting from the pilot coefficient estimate, each step applies

    theta_(l) = theta_(l-1) - Phi_p^{-1} (1/n) sum_i (b'(theta'z_i + gamma_p'u_i) - y_i)(z_i - W_p u_i)

with Phi_p the pilot-subsample Jacobian at beta_p, factorized once.  Only the
inner products theta'z_i and b'(.) refresh per iteration; the projected block
z_i - W_p u_i and the nuisance offsets are precomputed before the loop.

Iteration stops when the step norms stall: with error_(l) =
||theta_(l) - theta_(l-1)|| and error_(0) = 1, the loop breaks once the
relative change |error_(l) - error_(l-1)| / error_(l-1) falls below 1e-3
(evaluated from l = 1), once a step norm drops below 1e-12 (exact fixed
point), or at maxiter.  Confidence intervals use the
normal limit N(0, c(sigma0) Phi^{-1}) of sqrt(n)(theta_(l) - theta_0):
half-width rho_{1-alpha/2} sqrt(c * nu_jj / n) with nu_jj the (j, j) entry
of Phi_p^{-1}.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.stats import norm

from .dvs import CiSet
from .errors import InvalidInputError
from .lasso import PilotFit
from .score import check_conditioning

STALL_RATIO = 1e-3
ABS_STOP = 1e-12
DEFAULT_MAXITER = 50


@dataclass
class MultistepTrace:
    """Iterates, step norms, the pilot Jacobian, and the stopping index."""

    iterates: list
    errors: list
    Phi_p_hat: np.ndarray
    converged_at: int


def phi_hat_pilot(family, data, pilot: PilotFit):
    """Pilot Jacobian (1/r_p) sum_{K_p} b''(x'beta_p)(z - W_p u) z'."""
    idx = pilot.pilot
    rows = idx.rows()
    d = data.d
    Z = data.X[rows, :d]
    U = data.X[rows, d:]
    zw = Z - U @ pilot.W_p.T
    b2 = family.b2(data.X[rows] @ pilot.beta_p.beta)
    return (zw * b2[:, None]).T @ Z / idx.r


def _iterate(family, y, Z, zw, offset, theta0, lu, maxiter):
    """Iteration engine: touches only the precomputed arrays."""
    n = y.size
    theta = theta0.copy()
    iterates, errors = [], []
    prev_err = 1.0  # error_(0) = 1 by convention
    stopped_at = maxiter
    for ell in range(1, maxiter + 1):
        resid = family.b1(Z @ theta + offset) - y
        s = (resid @ zw) / n
        theta_new = theta - lu_solve(lu, s)
        err = float(np.linalg.norm(theta_new - theta))
        iterates.append(theta_new.copy())
        errors.append(err)
        theta = theta_new
        if err < ABS_STOP or abs(err - prev_err) / prev_err < STALL_RATIO:
            stopped_at = ell
            break
        prev_err = err
    return theta, iterates, errors, stopped_at


def multistep_iterate(family, data, pilot: PilotFit, maxiter=DEFAULT_MAXITER):
    """Run the multi-step refinement; returns (theta_end, MultistepTrace)."""
    Phi_p = phi_hat_pilot(family, data, pilot)
    check_conditioning(Phi_p, "pilot Jacobian")
    lu = lu_factor(Phi_p)
    d = data.d
    Z = data.X[:, :d]
    U = data.X[:, d:]
    zw = Z - U @ pilot.W_p.T
    offset = U @ pilot.beta_p.gamma
    theta, iterates, errors, stopped_at = _iterate(
        family, data.y, Z, zw, offset, pilot.beta_p.theta, lu, maxiter
    )
    trace = MultistepTrace(iterates=iterates, errors=errors, Phi_p_hat=Phi_p,
                           converged_at=stopped_at)
    return theta, trace


def multistep_confidence_intervals(theta_end, Phi_p_hat, dispersion, n, alpha) -> CiSet:
    """Normal-quantile intervals from the frozen pilot Jacobian."""
    if not 0.0 < alpha <= 1.0:
        raise InvalidInputError("alpha must lie in (0, 1]")
    theta_end = np.asarray(theta_end, dtype=float)
    check_conditioning(Phi_p_hat, "pilot Jacobian")
    nu = np.diag(np.linalg.inv(Phi_p_hat))
    var = dispersion * nu / n
    if np.any(var < 0):
        raise InvalidInputError("negative plug-in variance from the pilot Jacobian")
    half = norm.ppf(1.0 - alpha / 2.0) * np.sqrt(var)
    return CiSet(estimates=theta_end.copy(), lower=theta_end - half,
                 upper=theta_end + half, level=1.0 - alpha, method="multistep_normal")
