"""Experiment harness: replicated pipelines, coverage metrics, CSV emission.

One replication = generate data, draw the pilot subsample, fit the pilot
estimators, run each selected method, record per-method point estimates and
intervals.  Replication j shifts the master seed by j, so results are fully
deterministic given (master_seed, replications) and independent of how
replications are dispatched across workers.

Metrics per (case, method): MSE of the interest block, mean wall seconds per
replication (pilot fitting included, data generation excluded), average
coverage (per-coordinate for the per-coordinate methods, all-coordinates-
covered for the simultaneous methods), and average interval length.  Method
failures are counted and excluded from aggregates; more than 10% failures in
any method fails the run.
"""

import csv
import dataclasses
import io
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels, pipeline
from .errors import BenchFailureError, ConfigError, SubglmError
from .sampling import SeedSpec
from .simgen import SimConfig, make_dataset, preset
from .simultaneous import clime_solve_auto, default_gamma_n, phi_check_pilot

KNOWN_METHODS = ("dvs", "multistep", "simultaneous_plain", "simultaneous_studentized", "uni_score")
SIMULTANEOUS_METHODS = ("simultaneous_plain", "simultaneous_studentized")
FAILURE_CAP = 0.10
CSV_HEADER = ["case", "method", "d", "n", "p", "rp", "r", "mse", "time_s", "acp", "al", "reps", "failures"]


@dataclass
class ExperimentConfig:
    sim: SimConfig
    methods: tuple = ("dvs", "multistep", "uni_score")
    r_p: float = 1000.0
    r: float = 1000.0
    r_grid: tuple = None
    alpha: float = 0.05
    replications: int = 100
    r_m: int = 10_000
    B: int = 500
    master_seed: int = 1
    threads: int = 1
    lam: float = None
    tau: float = None
    cv_folds: int = 0
    gamma_scale: float = 0.5
    maxiter: int = 50
    case: str = ""
    measure_time: bool = True

    def validate(self):
        if self.r > self.sim.n or self.r_p > self.sim.n:
            raise ConfigError("subsample sizes must not exceed n")
        if self.r_grid is not None and any(r > self.sim.n for r in self.r_grid):
            raise ConfigError("every r in r_grid must not exceed n")
        unknown = set(self.methods) - set(KNOWN_METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        return self


@dataclass
class MetricsRow:
    case: str
    method: str
    d: int
    n: int
    p: int
    rp: float
    r: float
    mse: float
    time_s: float
    acp: float
    al: float
    reps: int
    failures: int


def config_from_json(source) -> ExperimentConfig:
    """Build a config from a JSON document (path, file object, or dict)."""
    if isinstance(source, dict):
        doc = dict(source)
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    try:
        sim_doc = dict(doc.pop("sim", {}))
        case = doc.pop("case", sim_doc.pop("preset", ""))
        if case:
            cfg = preset(case, n=sim_doc.pop("n", 1000), p=sim_doc.pop("p", 50),
                         d=sim_doc.pop("d", 3))
            sim = dataclasses.replace(cfg, **{k: v for k, v in sim_doc.items()})
        else:
            sim = SimConfig(**sim_doc)
        if "methods" in doc:
            doc["methods"] = tuple(doc["methods"])
        if doc.get("r_grid") is not None:
            doc["r_grid"] = tuple(doc["r_grid"])
        return ExperimentConfig(sim=sim, case=case, **doc).validate()
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc


@dataclass
class _MethodOutcome:
    estimate: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None
    elapsed: float = 0.0
    error: str = None


def _clock(enabled):
    return time.perf_counter() if enabled else 0.0


def _run_replication(config: ExperimentConfig, j):
    """All selected methods on replication j; returns (theta0, {method: outcome})."""
    seed_j = (config.master_seed + j) % (1 << 64)
    seed = SeedSpec(seed_j, 0)
    family = config.sim.family
    data, theta0 = make_dataset(config.sim, seed_j)
    mt = config.measure_time
    out = {}

    t0 = _clock(mt)
    try:
        pilot = pipeline.pilot_stage(family, data, config.r_p, seed,
                                     lam=config.lam, tau=config.tau,
                                     cv_folds=config.cv_folds)
    except (SubglmError, np.linalg.LinAlgError) as exc:
        msg = f"pilot: {exc}"
        return theta0, {m: _MethodOutcome(error=msg) for m in config.methods}
    pilot_time = _clock(mt) - t0

    uni_cache = {}

    def ensure_uni():
        if "theta" not in uni_cache:
            t = _clock(mt)
            theta_uni, ctx = pipeline.solve_uni(family, data, pilot, config.r, seed)
            uni_cache.update(theta=theta_uni, ctx=ctx, elapsed=_clock(mt) - t)
        return uni_cache["theta"], uni_cache["ctx"], uni_cache["elapsed"]

    clime_cache = {}

    def ensure_clime():
        if "solution" not in clime_cache:
            t = _clock(mt)
            Phi_check = phi_check_pilot(family, data, pilot)
            gamma_n = default_gamma_n(data.p, pilot.pilot.r, scale=config.gamma_scale)
            clime_cache["solution"] = clime_solve_auto(Phi_check, gamma_n)
            clime_cache["elapsed"] = _clock(mt) - t
        return clime_cache["solution"], clime_cache["elapsed"]

    for method in config.methods:
        t0 = _clock(mt)
        try:
            if method == "uni_score":
                theta_uni, _, uni_elapsed = ensure_uni()
                ci = pipeline.uni_score_ci(family, data, pilot, theta_uni, config.r, config.alpha)
                extra = uni_elapsed
            elif method == "dvs":
                theta_uni, ctx, uni_elapsed = ensure_uni()
                _, ci = pipeline.dvs_ci(family, data, pilot, config.r, config.alpha,
                                        config.r_m, seed, theta_uni=theta_uni, ctx=ctx)
                extra = uni_elapsed
            elif method == "multistep":
                _, ci, _ = pipeline.multistep_ci(family, data, pilot, config.alpha,
                                                 maxiter=config.maxiter)
                extra = 0.0
            elif method in SIMULTANEOUS_METHODS:
                clime, clime_elapsed = ensure_clime()
                studentized = method == "simultaneous_studentized"
                _, ci, _ = pipeline.simultaneous_ci(
                    family, data, pilot, config.B, config.alpha, config.gamma_scale,
                    studentized, seed, clime=clime,
                )
                extra = clime_elapsed
            else:  # pragma: no cover - validate() rejects unknown methods
                raise ConfigError(f"unknown method {method}")
            elapsed = pilot_time + extra + (_clock(mt) - t0)
            out[method] = _MethodOutcome(estimate=ci.estimates, lower=ci.lower,
                                         upper=ci.upper, elapsed=elapsed)
        except (SubglmError, np.linalg.LinAlgError) as exc:
            out[method] = _MethodOutcome(error=f"{method}: {exc}")
    return theta0, out


def _aggregate(config, method, per_rep, r_value) -> MetricsRow:
    """Fold per-replication outcomes of one method into a metrics row."""
    simultaneous = method in SIMULTANEOUS_METHODS
    sq_err, times, cover, lengths = [], [], [], []
    failures = 0
    for theta0, outcome in per_rep:
        if outcome.error is not None:
            failures += 1
            continue
        diff = outcome.estimate - theta0
        sq_err.append(float(diff @ diff))
        times.append(outcome.elapsed)
        hit = (outcome.lower <= theta0) & (theta0 <= outcome.upper)
        cover.append(float(np.all(hit)) if simultaneous else float(np.mean(hit)))
        lengths.append(float(np.mean(outcome.upper - outcome.lower)))
    reps = len(per_rep)
    if failures > FAILURE_CAP * reps:
        raise BenchFailureError(
            f"method {method}: {failures}/{reps} replications failed (> {FAILURE_CAP:.0%})"
        )
    used = max(reps - failures, 1)
    return MetricsRow(
        case=config.case or config.sim.model, method=method, d=config.sim.d,
        n=config.sim.n, p=config.sim.p, rp=config.r_p, r=r_value,
        mse=float(np.sum(sq_err) / used) if sq_err else math.nan,
        time_s=float(np.sum(times) / used) if times else 0.0,
        acp=float(np.sum(cover) / used) if cover else math.nan,
        al=float(np.sum(lengths) / used) if lengths else math.nan,
        reps=reps, failures=failures,
    )


def _map_replications(config, worker):
    """Run worker(j) for every replication, optionally across processes."""
    reps = range(config.replications)
    if config.threads <= 1:
        return [worker(j) for j in reps]
    kernels.warm_up()  # compile before forking so children inherit the JIT state
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=config.threads) as pool:
        return list(pool.map(worker, reps))


class _ReplicationTask:
    """Picklable worker closure for the process pool."""

    def __init__(self, config, fn):
        self.config = config
        self.fn = fn

    def __call__(self, j):
        return self.fn(self.config, j)


def run_experiment(config: ExperimentConfig):
    """Run every selected method over all replications; returns MetricsRow list."""
    config.validate()
    results = _map_replications(config, _ReplicationTask(config, _run_replication))
    rows = []
    for method in config.methods:
        per_rep = [(theta0, out[method]) for theta0, out in results]
        rows.append(_aggregate(config, method, per_rep, config.r))
    return rows


def _run_sweep_replication(config: ExperimentConfig, j):
    """dvs (and uni_score) per grid value; multistep and full-data reference once."""
    seed_j = (config.master_seed + j) % (1 << 64)
    seed = SeedSpec(seed_j, 0)
    family = config.sim.family
    data, theta0 = make_dataset(config.sim, seed_j)
    mt = config.measure_time
    out = {}
    t0 = _clock(mt)
    try:
        pilot = pipeline.pilot_stage(family, data, config.r_p, seed,
                                     lam=config.lam, tau=config.tau,
                                     cv_folds=config.cv_folds)
    except (SubglmError, np.linalg.LinAlgError) as exc:
        msg = f"pilot: {exc}"
        keys = [("multistep", 0.0)] if "multistep" in config.methods else []
        keys.append(("full_score", 0.0))
        keys += [(m, float(r)) for r in config.r_grid
                 for m in ("dvs", "uni_score") if m in config.methods]
        return theta0, {k: _MethodOutcome(error=msg) for k in keys}
    pilot_time = _clock(mt) - t0

    def record(key, fn):
        t0 = _clock(mt)
        try:
            ci = fn()
            out[key] = _MethodOutcome(estimate=ci.estimates, lower=ci.lower,
                                      upper=ci.upper,
                                      elapsed=pilot_time + (_clock(mt) - t0))
        except (SubglmError, np.linalg.LinAlgError) as exc:
            out[key] = _MethodOutcome(error=f"{key}: {exc}")

    if "multistep" in config.methods:
        record(("multistep", 0.0),
               lambda: pipeline.multistep_ci(family, data, pilot, config.alpha,
                                             maxiter=config.maxiter)[1])
    record(("full_score", 0.0),
           lambda: pipeline.full_score_ci(family, data, pilot, config.alpha)[1])
    for r in config.r_grid:
        if "dvs" in config.methods:
            record(("dvs", float(r)),
                   lambda r=r: pipeline.dvs_ci(family, data, pilot, r, config.alpha,
                                               config.r_m, seed)[1])
        if "uni_score" in config.methods:
            def uni(r=r):
                theta_uni, _ = pipeline.solve_uni(family, data, pilot, r, seed)
                return pipeline.uni_score_ci(family, data, pilot, theta_uni, r, config.alpha)
            record(("uni_score", float(r)), uni)
    return theta0, out


def run_r_sweep(config: ExperimentConfig):
    """Long-format sweep over config.r_grid; r-independent rows computed once."""
    config.validate()
    if not config.r_grid:
        raise ConfigError("r_grid must be a nonempty list of subsample sizes")
    results = _map_replications(config, _ReplicationTask(config, _run_sweep_replication))
    keys = list(results[0][1].keys())
    rows = []
    for key in keys:
        method, r_value = key
        per_rep = [(theta0, out[key]) for theta0, out in results]
        rows.append(_aggregate(config, method, per_rep, r_value))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([
            row.case, row.method, row.d, row.n, row.p,
            f"{row.rp:.10g}", f"{row.r:.10g}", f"{row.mse:.10g}",
            f"{row.time_s:.6g}", f"{row.acp:.10g}", f"{row.al:.10g}",
            row.reps, row.failures,
        ])
    return buf.getvalue()


def write_csv(rows, path):
    text = rows_to_csv(rows)
    with open(path, "w") as fh:
        fh.write(text)
    return text
