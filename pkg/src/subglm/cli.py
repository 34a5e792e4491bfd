"""Command-line interface.

Subcommands: simulate | fit | ci-dvs | ci-multistep | ci-simultaneous |
bench | sweep.  Exit codes: 0 success, 2 configuration error, 3 when more
than 10% of replications fail for some method.
"""

import argparse
import json
import sys

import numpy as np

from . import bench as bench_mod
from . import pipeline
from .data import load_dataset, save_binary, save_csv
from .dvs import CiSet
from .errors import BenchFailureError, ConfigError, SubglmError
from .families import family_from_name
from .sampling import SeedSpec
from .simgen import gen_covariates, gen_response, preset


def _add_dataset_args(sp):
    sp.add_argument("dataset", help="CSV or SGLM binary dataset path")
    sp.add_argument("--family", choices=["gaussian", "logistic"], required=True)
    sp.add_argument("--d", type=int, required=True, help="interest dimension (first d columns)")
    sp.add_argument("--seed", type=int, default=0, help="master seed")
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--cv-folds", type=int, default=0)
    sp.add_argument("--out", default=None, help="output CSV path (default stdout)")


def _emit_ci(ci: CiSet, out):
    lines = ["coord,estimate,lower,upper"]
    for j in range(ci.estimates.size):
        lines.append(f"{j + 1},{ci.estimates[j]:.10g},{ci.lower[j]:.10g},{ci.upper[j]:.10g}")
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser():
    ap = argparse.ArgumentParser(prog="subglm")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="emit a synthetic dataset from a named preset")
    sim.add_argument("--preset", required=True,
                     help="linear-a|b|c|d or logistic-a|b")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--d", type=int, default=3)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--format", choices=["csv", "bin"], default="csv")
    sim.add_argument("--out", required=True)

    fit = sub.add_parser("fit", help="pilot-stage penalized fits on one dataset")
    _add_dataset_args(fit)
    fit.add_argument("--rp", type=float, required=True, help="expected pilot subsample size")

    dvs = sub.add_parser("ci-dvs", help="DVS estimate with Monte-Carlo intervals")
    _add_dataset_args(dvs)
    dvs.add_argument("--rp", type=float, required=True)
    dvs.add_argument("--r", type=float, required=True)
    dvs.add_argument("--rm", type=int, default=10_000)
    dvs.add_argument("--alpha", type=float, default=0.05)

    ms = sub.add_parser("ci-multistep", help="multi-step estimate with normal intervals")
    _add_dataset_args(ms)
    ms.add_argument("--rp", type=float, required=True)
    ms.add_argument("--maxiter", type=int, default=50)
    ms.add_argument("--alpha", type=float, default=0.05)

    sim_ci = sub.add_parser("ci-simultaneous", help="debiased estimate with bootstrap bands")
    _add_dataset_args(sim_ci)
    sim_ci.add_argument("--rp", type=float, required=True)
    sim_ci.add_argument("--B", type=int, default=500)
    sim_ci.add_argument("--gamma-scale", type=float, default=0.5)
    sim_ci.add_argument("--studentized", action="store_true")
    sim_ci.add_argument("--alpha", type=float, default=0.05)

    for name, desc in (("bench", "replicated benchmark"), ("sweep", "AL/ACP vs r sweep")):
        b = sub.add_parser(name, help=desc)
        b.add_argument("--config", required=True, help="JSON experiment config")
        b.add_argument("--out", default=None, help="output CSV path (default stdout)")
        b.add_argument("--seed", type=int, default=None, help="override master seed")
        b.add_argument("--threads", type=int, default=None, help="override worker count")

    return ap


def _cmd_simulate(args):
    cfg = preset(args.preset, n=args.n, p=args.p, d=args.d)
    seed = SeedSpec(args.seed, 0)
    X = gen_covariates(cfg, cfg.n, seed)
    y = gen_response(cfg, X, seed)
    if cfg.model == "logistic":
        X = np.column_stack([X, np.ones(cfg.n)])
    if args.format == "bin":
        save_binary(args.out, X, y)
    else:
        save_csv(args.out, X, y)
    return 0


def _pilot_from_args(args, data):
    family = family_from_name(args.family)
    seed = SeedSpec(args.seed, 0)
    pilot = pipeline.pilot_stage(family, data, args.rp, seed, lam=args.lam,
                                 tau=args.tau, cv_folds=args.cv_folds)
    return family, seed, pilot


def _cmd_fit(args):
    data = load_dataset(args.dataset, args.d)
    _, _, pilot = _pilot_from_args(args, data)
    doc = {
        "lambda": pilot.lam,
        "tau": pilot.tau,
        "dispersion": pilot.dispersion_hat,
        "pilot_size": pilot.pilot.size,
        "nnz_beta": int(np.count_nonzero(pilot.beta_p.beta)),
        "theta_p": pilot.beta_p.theta.tolist(),
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_ci_dvs(args):
    data = load_dataset(args.dataset, args.d)
    family, seed, pilot = _pilot_from_args(args, data)
    _, ci = pipeline.dvs_ci(family, data, pilot, args.r, args.alpha, args.rm, seed)
    _emit_ci(ci, args.out)
    return 0


def _cmd_ci_multistep(args):
    data = load_dataset(args.dataset, args.d)
    family, _, pilot = _pilot_from_args(args, data)
    _, ci, _ = pipeline.multistep_ci(family, data, pilot, args.alpha, maxiter=args.maxiter)
    _emit_ci(ci, args.out)
    return 0


def _cmd_ci_simultaneous(args):
    data = load_dataset(args.dataset, args.d)
    family, seed, pilot = _pilot_from_args(args, data)
    _, ci, sidecar = pipeline.simultaneous_ci(
        family, data, pilot, args.B, args.alpha, args.gamma_scale,
        args.studentized, seed,
    )
    _emit_ci(ci, args.out)
    sidecar_path = (args.out or "ci-simultaneous") + ".json"
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2)
    return 0


def _cmd_bench(args, sweep=False):
    config = bench_mod.config_from_json(args.config)
    if args.seed is not None:
        config.master_seed = args.seed
    if args.threads is not None:
        config.threads = args.threads
    rows = bench_mod.run_r_sweep(config) if sweep else bench_mod.run_experiment(config)
    text = bench_mod.rows_to_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "fit": _cmd_fit,
        "ci-dvs": _cmd_ci_dvs,
        "ci-multistep": _cmd_ci_multistep,
        "ci-simultaneous": _cmd_ci_simultaneous,
        "bench": lambda a: _cmd_bench(a, sweep=False),
        "sweep": lambda a: _cmd_bench(a, sweep=True),
    }
    try:
        return handlers[args.command](args)
    except BenchFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SubglmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
