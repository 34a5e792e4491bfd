"""Acceptance suite: one test per criterion, tolerances pinned, one line printed each.

Stochastic criteria run the desk-scale benchmark configurations; the stated
runtime budgets are asserted as hard caps.
"""

import time

import numpy as np
from scipy.optimize import linprog, root
from scipy.stats import norm

from subglm.bench import ExperimentConfig, run_experiment, run_r_sweep
from subglm.data import Dataset
from subglm.dvs import dvs_estimate, estimate_asymptotic_model, h_transform
from subglm.families import GAUSSIAN, LOGISTIC, b_derivatives
from subglm.lasso import (
    default_penalty,
    fit_lasso_glm,
    fit_pilot,
    fit_w_matrix,
    lasso_kkt_residual,
    w_kkt_residual,
)
from subglm.multistep import multistep_iterate, phi_hat_pilot
from subglm.sampling import SeedSpec, poisson_subsample
from subglm.score import ScoreContext, solve_subsampled_score
from subglm.simgen import preset
from subglm.simultaneous import clime_solve, debiased_estimate, multiplier_bootstrap, phi_check_pilot


def _report(num, label, ok, elapsed, budget_s):
    status = "PASS" if ok else "FAIL"
    print(f"criterion {num} ({label}): {status} [{elapsed:.1f}s / budget {budget_s:.0f}s]")
    assert ok, f"criterion {num} ({label}) failed"
    assert elapsed < budget_s, f"criterion {num} exceeded its runtime budget"


def _tiny_instance(rng, family):
    n, p, d = 200, 10, 2
    X = rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[:3] = [1.0, -0.8, 0.6]
    eta = X @ beta
    if family is LOGISTIC:
        y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    else:
        y = eta + rng.normal(size=n)
    return Dataset(X, y, d)


def test_criterion_1_oracle_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(101)
    ok = True
    for trial in range(50):
        family = LOGISTIC if trial % 2 else GAUSSIAN
        tol = 1e-6 if family is LOGISTIC else 1e-8
        data = _tiny_instance(rng, family)
        d = data.d
        seed = SeedSpec(1000 + trial, 0)
        pilot_idx = poisson_subsample(data.n, 140, seed.with_stream(1))
        pilot = fit_pilot(family, data, pilot_idx)
        gamma, W = pilot.beta_p.gamma, pilot.W_p
        K = poisson_subsample(data.n, 120, seed.with_stream(2))
        ctx = ScoreContext(family, data, gamma, W, K)
        theta_uni = solve_subsampled_score(ctx, pilot.beta_p.theta).theta

        # independent root of the subsampled score equation (generic solver)
        def sub_score(th):
            out = np.zeros(d)
            for i in K.indices:
                x = data.X[i - 1]
                t = th @ x[:d] + gamma @ x[d:]
                out += (family.b1(t) - data.y[i - 1]) * (x[:d] - W @ x[d:])
            return out / K.r

        ref = root(sub_score, pilot.beta_p.theta, tol=1e-13)
        ok &= np.abs(theta_uni - ref.x).max() < tol

        # DVS one-step vs naive dense loops
        J = np.zeros((d, d))
        for i in K.indices:
            x = data.X[i - 1]
            t = theta_uni @ x[:d] + gamma @ x[d:]
            J += family.b2(t) * np.outer(x[:d] - W @ x[d:], x[:d])
        J /= K.r
        s = np.zeros(d)
        for i in range(data.n):
            x = data.X[i]
            t = theta_uni @ x[:d] + gamma @ x[d:]
            s += (family.b1(t) - data.y[i]) * (x[:d] - W @ x[d:])
        s /= data.n
        dvs_oracle = theta_uni - np.linalg.solve(J, s)
        ok &= np.abs(dvs_estimate(ctx, theta_uni) - dvs_oracle).max() < tol

        # multistep l=1 vs one literal update
        Phi_p = phi_hat_pilot(family, data, pilot)
        sp = np.zeros(d)
        for i in range(data.n):
            x = data.X[i]
            t = pilot.beta_p.theta @ x[:d] + gamma @ x[d:]
            sp += (family.b1(t) - data.y[i]) * (x[:d] - W @ x[d:])
        sp /= data.n
        ms_oracle = pilot.beta_p.theta - np.linalg.solve(Phi_p, sp)
        _, trace = multistep_iterate(family, data, pilot, maxiter=1)
        ok &= np.abs(trace.iterates[0] - ms_oracle).max() < tol

        # debiased estimator vs naive dense evaluation
        G = np.linalg.inv(phi_check_pilot(family, data, pilot))
        deb_oracle = pilot.beta_p.theta - G @ sp
        ok &= np.abs(debiased_estimate(family, data, pilot, G) - deb_oracle).max() < tol

        # row programs of the constrained inverse vs a generic LP oracle
        Phi_check = phi_check_pilot(family, data, pilot)
        gamma_n = 0.05
        sol = clime_solve(Phi_check, gamma_n)
        Aub = np.vstack([np.hstack([Phi_check, -Phi_check]),
                         np.hstack([-Phi_check, Phi_check])])
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            ref_lp = linprog(np.ones(2 * d), A_ub=Aub,
                             b_ub=np.concatenate([gamma_n + e, gamma_n - e]),
                             bounds=(0, None), method="highs")
            ok &= ref_lp.success
            ok &= abs(np.abs(sol.G_raw[i]).sum() - ref_lp.fun) < 1e-8
    _report(1, "oracle equivalence", ok, time.time() - t0, 60)


def test_criterion_2_derivative_and_kkt_suites():
    t0 = time.time()
    ok = True
    rng = np.random.default_rng(202)
    for family in (GAUSSIAN, LOGISTIC):
        t = rng.uniform(-8, 8, size=100)
        h = 1e-5
        _, b1p, b2p, _ = b_derivatives(family, t + h)
        _, b1m, b2m, _ = b_derivatives(family, t - h)
        bp = family.b(t + h)
        bm = family.b(t - h)
        _, b1, b2, b3 = b_derivatives(family, t)
        ok &= np.all(np.abs((bp - bm) / (2 * h) - b1) <= 1e-6 * (1 + np.abs(b1)))
        ok &= np.all(np.abs((b1p - b1m) / (2 * h) - b2) <= 1e-6 * (1 + np.abs(b2)))
        ok &= np.all(np.abs((b2p - b2m) / (2 * h) - b3) <= 1e-6 * (1 + np.abs(b3)))

    for trial in range(100):
        family = LOGISTIC if trial % 2 else GAUSSIAN
        n = int(rng.integers(80, 200))
        p = int(rng.integers(6, 16))
        d = int(rng.integers(1, 4))
        X = rng.normal(size=(n, p))
        beta = np.zeros(p)
        beta[:3] = rng.normal(size=3)
        eta = X @ beta
        y = ((rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
             if family is LOGISTIC else eta + rng.normal(size=n))
        data = Dataset(X, y, d)
        pilot = poisson_subsample(n, 0.85 * n, SeedSpec(trial, 1))
        lam = 10 ** rng.uniform(-2.2, -0.8)
        fit = fit_lasso_glm(family, data, pilot, lam)
        ok &= lasso_kkt_residual(family, data, pilot, fit, lam) < 1e-7
        tau = 10 ** rng.uniform(-2.2, -0.8)
        W = fit_w_matrix(family, data, pilot, fit, tau)
        ok &= w_kkt_residual(family, data, pilot, fit, W, tau) < 1e-7
    _report(2, "derivative and KKT suites", ok, time.time() - t0, 120)


def test_criterion_3_linear_table_analogue():
    t0 = time.time()
    cfg = ExperimentConfig(
        sim=preset("linear-a", n=20_000, p=100, d=3),
        methods=("dvs", "multistep", "uni_score"),
        r_p=1000.0, r=1000.0, alpha=0.05, replications=300, r_m=10_000,
        master_seed=31, threads=1,
    )
    rows = {r.method: r for r in run_experiment(cfg)}
    dvs, ms, uni = rows["dvs"], rows["multistep"], rows["uni_score"]
    print(f"  dvs: acp={dvs.acp:.3f} al={dvs.al:.4f} mse={dvs.mse:.2e} | "
          f"multistep: acp={ms.acp:.3f} al={ms.al:.4f} mse={ms.mse:.2e} | "
          f"uni: acp={uni.acp:.3f} al={uni.al:.4f} mse={uni.mse:.2e}")
    ok = (0.92 <= dvs.acp <= 0.98 and 0.92 <= ms.acp <= 0.98
          and ms.al < dvs.al < uni.al
          and ms.al <= 0.5 * uni.al
          and ms.mse <= dvs.mse <= uni.mse)
    _report(3, "desk linear Table-1 analogue", ok, time.time() - t0, 15 * 60)


def test_criterion_4_logistic_table_analogue():
    t0 = time.time()
    # penalty constants tuned for the logistic design: the covariate /3 scaling
    # and the b'' curvature shrink both problems' gradients well below the
    # unit-constant rate, which would zero out the signal and the W rows
    rate = default_penalty(100, 1500)
    cfg = ExperimentConfig(
        sim=preset("logistic-a", n=20_000, p=100, d=3),
        methods=("dvs", "multistep", "uni_score"),
        r_p=1500.0, r=1500.0, alpha=0.05, replications=200, r_m=10_000,
        master_seed=41, threads=1,
        lam=0.3 * rate, tau=0.1 * rate,
    )
    rows = {r.method: r for r in run_experiment(cfg)}
    dvs, ms, uni = rows["dvs"], rows["multistep"], rows["uni_score"]
    print(f"  dvs: acp={dvs.acp:.3f} al={dvs.al:.4f} mse={dvs.mse:.2e} | "
          f"multistep: acp={ms.acp:.3f} al={ms.al:.4f} mse={ms.mse:.2e} | "
          f"uni: acp={uni.acp:.3f} al={uni.al:.4f} mse={uni.mse:.2e}")
    ok = (0.91 <= dvs.acp <= 0.98 and 0.91 <= ms.acp <= 0.98
          and ms.al < dvs.al < uni.al
          and ms.al <= 0.5 * uni.al
          and ms.mse <= dvs.mse <= uni.mse)
    _report(4, "desk logistic Table-3 analogue", ok, time.time() - t0, 20 * 60)


def _pava_decreasing(values):
    """Pool-adjacent-violators fit of a non-increasing sequence (L2)."""
    vals = [float(v) for v in values]
    weights = [1.0] * len(vals)
    blocks = []
    for v, w in zip(vals, weights):
        blocks.append([v, w])
        while len(blocks) > 1 and blocks[-2][0] < blocks[-1][0]:
            v1, w1 = blocks.pop()
            v0, w0 = blocks.pop()
            blocks.append([(v0 * w0 + v1 * w1) / (w0 + w1), w0 + w1])
    fit = []
    for v, w in blocks:
        fit.extend([v] * int(w))
    return np.array(fit)


def test_criterion_5_figure_trend():
    t0 = time.time()
    cfg = ExperimentConfig(
        sim=preset("linear-a", n=20_000, p=100, d=3),
        methods=("dvs", "multistep"),
        r_p=2000.0, r_grid=(250.0, 500.0, 1000.0, 2000.0, 4000.0),
        alpha=0.05, replications=100, r_m=10_000,
        master_seed=51, threads=1,
    )
    rows = run_r_sweep(cfg)
    dvs_rows = sorted((r for r in rows if r.method == "dvs"), key=lambda r: r.r)
    al = np.array([r.al for r in dvs_rows])
    ms_al = next(r.al for r in rows if r.method == "multistep")
    iso = _pava_decreasing(al)
    resid = np.abs(al - iso).max()
    rng_al = al.max() - al.min()
    ratio = al[-1] / ms_al
    print(f"  AL(dvs) over r: {np.round(al, 5).tolist()}  AL(ms)={ms_al:.5f}  "
          f"iso resid={resid:.2e} range={rng_al:.4f} end ratio={ratio:.3f}")
    ok = resid < 0.10 * rng_al and abs(ratio - 1.0) <= 0.15
    _report(5, "desk Figure-1 trend", ok, time.time() - t0, 20 * 60)


def test_criterion_6_simultaneous_table_analogue():
    t0 = time.time()
    cfg = ExperimentConfig(
        sim=preset("linear-a", n=10_000, p=100, d=20),
        methods=("simultaneous_plain", "simultaneous_studentized"),
        r_p=2000.0, alpha=0.05, replications=150, B=500,
        master_seed=61, threads=1,
    )
    rows = {r.method: r for r in run_experiment(cfg)}
    plain = rows["simultaneous_plain"]
    stud = rows["simultaneous_studentized"]
    print(f"  plain: acp={plain.acp:.3f} al={plain.al:.4f} | "
          f"studentized: acp={stud.acp:.3f} al={stud.al:.4f}")
    ok = (0.90 <= plain.acp <= 0.98 and 0.90 <= stud.acp <= 0.98
          and abs(stud.al / plain.al - 1.0) <= 0.10)
    _report(6, "desk simultaneous Table-2/4 analogue", ok, time.time() - t0, 25 * 60)


def test_criterion_7_bootstrap_analytics():
    t0 = time.time()
    ok = True
    c = 1.3
    data = Dataset(np.array([[1.0, 0.0]]), np.array([0.0]), d=1)
    from subglm.data import ParamSplit
    from subglm.lasso import PilotFit
    from subglm.sampling import SubsampleIndex

    pilot = PilotFit(
        beta_p=ParamSplit(np.array([c, 0.0]), 1), W_p=np.zeros((1, 1)),
        lam=0.0, tau=0.0, dispersion_hat=1.0,
        pilot=SubsampleIndex(np.array([1]), 1, 1.0),
    )
    seed = SeedSpec(71, 0)
    q = multiplier_bootstrap(GAUSSIAN, data, pilot, np.eye(1), 100_000, False, seed)
    oracle = norm.ppf(0.975) * c  # half-normal 0.95 quantile of |e|*c
    ok &= abs(q.c_alpha - oracle) <= 0.03 * oracle

    ok &= q.quantile_at(0.90) <= q.quantile_at(0.95) <= q.quantile_at(0.99)

    # byte-exact determinism across runs and worker counts
    q1 = multiplier_bootstrap(GAUSSIAN, data, pilot, np.eye(1), 2000, False, seed)
    q2 = multiplier_bootstrap(GAUSSIAN, data, pilot, np.eye(1), 2000, False, seed)
    q3 = multiplier_bootstrap(GAUSSIAN, data, pilot, np.eye(1), 2000, False, seed, workers=3)
    ok &= np.array_equal(q1.draws, q2.draws) and np.array_equal(q1.draws, q3.draws)
    ok &= q1.draws.tobytes() == q3.draws.tobytes()
    ok &= q1.c_alpha == q2.c_alpha == q3.c_alpha
    _report(7, "bootstrap analytics", ok, time.time() - t0, 120)


def test_criterion_8_regime_handling():
    t0 = time.time()
    ok = True
    rng = np.random.default_rng(81)
    n = 2 ** 20  # sqrt(n) = 1024, exactly representable
    data = _tiny_instance(rng, GAUSSIAN)
    pilot = fit_pilot(GAUSSIAN, data, poisson_subsample(data.n, 150, SeedSpec(8, 1)))
    theta = pilot.beta_p.theta
    for r, m1_is_one, m2_is_one in ((32.0, False, True), (4096.0, True, False)):
        model = estimate_asymptotic_model(GAUSSIAN, data, pilot, theta, r=r, n=n)
        scale = min(np.sqrt(n), r)
        ok &= model.m1 * np.sqrt(n) == scale
        ok &= model.m2 * r == scale
        ok &= (model.m1 == 1.0) == m1_is_one
        ok &= (model.m2 == 1.0) == m2_is_one
        ok &= np.all(model.T_hat == 0.0)  # gaussian: quadratic term exactly absent
        # h with the (zero) quadratic term equals h with the term deleted, bitwise
        U = rng.normal(size=(20, model.V_hat.shape[0]))
        h_full = h_transform(model, U)
        A = np.linalg.inv(model.Phi_hat)
        d = model.d
        a = U[:, :d] @ A.T
        U3 = U[:, 2 * d:].reshape(-1, d, d)
        quad = np.einsum("rk,jkl,rl->rj", a, model.T_hat.reshape(d, d, d), a)
        h_lin = (0.5 * model.m2 * (quad @ A.T) - model.m1 * (U[:, d:2 * d] @ A.T)
                 - model.m2 * (np.einsum("rkl,rl->rk", U3, a) @ A.T))
        ok &= np.array_equal(h_full, h_lin)
        ok &= np.all(quad == 0.0)
    _report(8, "regime handling", ok, time.time() - t0, 60)
