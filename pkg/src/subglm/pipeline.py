"""End-to-end inference pipelines shared by the CLI and the benchmark harness.

Each pipeline runs: pilot subsample -> penalized pilot fits -> the requested
estimator and its confidence intervals.  Streams are derived from one master
seed per the documented constants in ``subglm.sampling``.
"""

import numpy as np
from scipy.stats import norm

from .dvs import CiSet, dvs_confidence_intervals, dvs_estimate, estimate_asymptotic_model
from .errors import InvalidInputError
from .lasso import PilotFit, fit_pilot, select_penalties
from .multistep import multistep_confidence_intervals, multistep_iterate
from .sampling import STREAM_MAIN, STREAM_PILOT, SeedSpec, poisson_subsample
from .score import ScoreContext, solve_subsampled_score
from .simultaneous import (
    clime_solve_auto,
    debiased_estimate,
    default_gamma_n,
    multiplier_bootstrap,
    phi_check_pilot,
    simultaneous_confidence_intervals,
)


def pilot_stage(family, data, r_p, seed: SeedSpec, lam=None, tau=None,
                cv_folds=0, cv_grid_size=12) -> PilotFit:
    idx = poisson_subsample(data.n, r_p, seed.with_stream(STREAM_PILOT))
    if cv_folds:
        lam, tau = select_penalties(family, data, idx, grid_size=cv_grid_size,
                                    folds=cv_folds, seed=seed)
    return fit_pilot(family, data, idx, lam=lam, tau=tau)


def solve_uni(family, data, pilot: PilotFit, r, seed: SeedSpec):
    """Main subsample and the root of the subsampled score equation."""
    K = poisson_subsample(data.n, r, seed.with_stream(STREAM_MAIN))
    ctx = ScoreContext(family, data, pilot.beta_p.gamma, pilot.W_p, K)
    result = solve_subsampled_score(ctx, pilot.beta_p.theta)
    return result.theta, ctx


def _normal_ci(theta, variances, alpha, method) -> CiSet:
    half = norm.ppf(1.0 - alpha / 2.0) * np.sqrt(variances)
    theta = np.asarray(theta, dtype=float)
    return CiSet(estimates=theta.copy(), lower=theta - half, upper=theta + half,
                 level=1.0 - alpha, method=method)


def uni_score_ci(family, data, pilot: PilotFit, theta_uni, r, alpha) -> CiSet:
    """Baseline r^{-1/2}-rate intervals for the subsampled-score root.

    Variance plug-in c(sigma0) Phi^{-1} / r with the symmetric pilot moment.
    """
    Phi = phi_check_pilot(family, data, pilot)
    nu = np.diag(np.linalg.inv(Phi))
    var = pilot.dispersion_hat * nu / r
    if np.any(var < 0):
        raise InvalidInputError("negative plug-in variance in uni_score_ci")
    return _normal_ci(theta_uni, var, alpha, "uni_score")


def dvs_ci(family, data, pilot: PilotFit, r, alpha, r_m, seed: SeedSpec,
           theta_uni=None, ctx=None):
    """DVS point estimate and Monte-Carlo intervals; returns (theta_tilde, CiSet)."""
    if theta_uni is None or ctx is None:
        theta_uni, ctx = solve_uni(family, data, pilot, r, seed)
    theta_tilde = dvs_estimate(ctx, theta_uni)
    model = estimate_asymptotic_model(family, data, pilot, theta_tilde, r, data.n)
    ci = dvs_confidence_intervals(model, theta_tilde, alpha, r_m=r_m, seed=seed)
    return theta_tilde, ci


def multistep_ci(family, data, pilot: PilotFit, alpha, maxiter=50):
    """Multi-step point estimate and normal intervals; returns (theta_end, CiSet, trace)."""
    theta_end, trace = multistep_iterate(family, data, pilot, maxiter=maxiter)
    ci = multistep_confidence_intervals(theta_end, trace.Phi_p_hat,
                                        pilot.dispersion_hat, data.n, alpha)
    return theta_end, ci, trace


def full_score_ci(family, data, pilot: PilotFit, alpha):
    """Full-data decorrelated-score reference: Newton on the full score equation."""
    ctx = ScoreContext(family, data, pilot.beta_p.gamma, pilot.W_p, None)
    result = solve_subsampled_score(ctx, pilot.beta_p.theta)
    w = family.b2(ctx.z @ result.theta + ctx.offset)
    Phi = (ctx.zw * w[:, None]).T @ ctx.zw / data.n
    nu = np.diag(np.linalg.inv(0.5 * (Phi + Phi.T)))
    var = pilot.dispersion_hat * nu / data.n
    if np.any(var < 0):
        raise InvalidInputError("negative plug-in variance in full_score_ci")
    return result.theta, _normal_ci(result.theta, var, alpha, "full_score")


def simultaneous_ci(family, data, pilot: PilotFit, B, alpha, gamma_scale,
                    studentized, seed: SeedSpec, clime=None):
    """Debiased estimate and simultaneous bootstrap intervals.

    Returns (theta_check, CiSet, sidecar) where sidecar records the
    constraint level actually used, both feasibility residuals, and the
    bootstrap quantile.
    """
    if clime is None:
        Phi_check = phi_check_pilot(family, data, pilot)
        gamma_n = default_gamma_n(data.p, pilot.pilot.r, scale=gamma_scale)
        clime = clime_solve_auto(Phi_check, gamma_n)
    theta_check = debiased_estimate(family, data, pilot, clime.G)
    quantiles = multiplier_bootstrap(family, data, pilot, clime.G, B,
                                     studentized, seed, alpha=alpha)
    ci = simultaneous_confidence_intervals(theta_check, quantiles, clime.G, data.n, alpha)
    sidecar = {
        "gamma_n": clime.gamma_n,
        "feasibility_residual": clime.feasibility_residual,
        "sym_feasibility_residual": clime.sym_feasibility_residual,
        "c_alpha": quantiles.c_alpha,
        "studentized": bool(studentized),
        "B": int(B),
    }
    return theta_check, ci, sidecar
