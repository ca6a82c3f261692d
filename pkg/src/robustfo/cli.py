"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 diverged run, 3 step size
above the admissible bound.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import config as cfgmod
from .analysis import PRINTED, TELESCOPED, compute_constants, verify_bound, write_bound_csv
from .closed_loop import CONTROLLER, run, tail_mean, write_log_csv
from .errors import ConfigError
from .experiments import grid_case, sweep_dimension, sweep_sigma, sweep_summary

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_STEP = 3
HASH_CHARS = 16


def _stem(kind, digest):
    return f"{kind}-{digest[:HASH_CHARS]}"


def _fmt(v):
    return format(float(v), ".17g")


def _meta(cfg, digest, seed_offset):
    return {"config": cfg, "config_hash": digest, "seed_offset": seed_offset}


def cmd_run(cfg, digest, args):
    scenario = cfgmod.build_scenario(cfg)
    log = run(scenario)
    stem = os.path.join(args.out, _stem("run", digest))
    write_log_csv(log, stem + ".csv", digest)
    summary = _meta(cfg, digest, args.seed_offset)
    summary.update({"status": log.status, "steps": len(log), "eta": scenario.controller.eta})
    if not log.diverged:
        summary.update({"final_gap": float(log.gap[-1]), "tail_gap": tail_mean(log.gap),
                        "final_err_u": float(log.err_u[-1])})
    cfgmod.dump(summary, stem + ".json")
    print(f"{log.status}: {len(log)} steps -> {stem}.csv")
    return EXIT_DIVERGED if log.diverged else EXIT_OK


def _write_sweep(rows, path, param):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([param, "seed", "final_gap", "tail_gap", "diverged", "eta"])
        for r in rows:
            writer.writerow([_fmt(r.param), r.seed, _fmt(r.final_gap), _fmt(r.tail_gap),
                             int(r.diverged), _fmt(r.eta)])


def _sweep(cfg, digest, args, kind):
    exp = cfg.get("experiment", {})
    seeds = cfgmod.seed_list(exp.get("seeds"), range(20) if kind == "sigma" else range(100))
    if kind == "sigma":
        kwargs = {k: exp[k] for k in ("sigmas", "m", "lam", "horizon", "eta_factor") if k in exp}
        rows = sweep_sigma(seeds=seeds, jobs=args.jobs, **kwargs)
    else:
        kwargs = {k: exp[k] for k in ("dims", "eta", "lam", "horizon") if k in exp}
        rows = sweep_dimension(seeds=seeds, jobs=args.jobs, **kwargs)
    stem = os.path.join(args.out, _stem(f"sweep-{kind}", digest))
    _write_sweep(rows, stem + ".csv", "sigma" if kind == "sigma" else "m")
    summary = _meta(cfg, digest, args.seed_offset)
    summary.update(sweep_summary(rows))
    cfgmod.dump(summary, stem + ".json")
    for p, g, n in zip(summary["params"], summary["median_final_gap"], summary["diverged"]):
        print(f"{'sigma' if kind == 'sigma' else 'm'}={p:g}: median gap {g:.6g}, diverged {n}")
    return EXIT_OK


def cmd_sweep_sigma(cfg, digest, args):
    return _sweep(cfg, digest, args, "sigma")


def cmd_sweep_dim(cfg, digest, args):
    return _sweep(cfg, digest, args, "dim")


def cmd_grid(cfg, digest, args):
    spec = cfgmod.feeder_spec(cfg)
    exp = cfg.get("experiment", {})
    keys = ("new_pcc", "lam", "eta_factor", "rho", "n_samples", "history_seed", "v_ref")
    result = grid_case(spec, **{k: exp[k] for k in keys if k in exp})
    stem = os.path.join(args.out, _stem("grid", digest))
    for variant, log in result.logs.items():
        write_log_csv(log, f"{stem}-{variant}.csv", digest)
    summary = _meta(cfg, digest, args.seed_offset)
    summary.update(result.summary)
    cfgmod.dump(summary, stem + ".json")
    for variant, row in result.summary["controllers"].items():
        print(f"{variant:10s} violations {row['violations']:4d}  curtailment "
              f"{row['curtailment']:.4g}  |q| {row['abs_q']:.4g}  zero q {row['zero_q']}")
    diverged = any(log.diverged for log in result.logs.values())
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_analyze(cfg, digest, args):
    scenario = cfgmod.build_scenario(cfg)
    scenario.target = CONTROLLER
    plant, ctl = scenario.plant, scenario.controller
    constants = compute_constants(plant, ctl, scenario.Qbar)
    summary = _meta(cfg, digest, args.seed_offset)
    summary["constants"] = constants.as_dict()
    stem = os.path.join(args.out, _stem("analyze", digest))
    for name, value in constants.as_dict().items():
        if np.ndim(value) == 0:
            print(f"{name:15s} {float(value):.10g}")
    if ctl.eta > constants.eta_star:
        msg = (f"eta = {ctl.eta:.6g} exceeds the admissible step eta* = "
               f"{constants.eta_star:.6g}; the tracking bound does not apply")
        summary["bound"] = {"applicable": False, "reason": msg}
        cfgmod.dump(summary, stem + ".json")
        print(msg, file=sys.stderr)
        return EXIT_STEP
    log = run(scenario)
    form = cfg.get("experiment", {}).get("form", TELESCOPED)
    report = verify_bound(log, constants, scenario.H_true, ctl.H_hat,
                          form=PRINTED if form == PRINTED else TELESCOPED)
    summary["bound"] = {"applicable": report.applicable, "holds": report.holds,
                        "first_violation": report.first_violation, "reason": report.reason,
                        "form": form, "status": log.status}
    if report.applicable:
        summary["bound"]["min_margin"] = float(np.min(report.margin))
        write_bound_csv(report, stem + "-bound.csv")
    cfgmod.dump(summary, stem + ".json")
    print(report.summary())
    return EXIT_DIVERGED if log.diverged else EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep-sigma": cmd_sweep_sigma,
    "sweep-dim": cmd_sweep_dim,
    "grid": cmd_grid,
    "analyze": cmd_analyze,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="robustfo", description="Robust feedback optimization experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", default="./out", help="output directory (default ./out)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--seed-offset", type=int, default=0, help="added to every seed")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = cfgmod.load(args.config)
        cfg = cfgmod.apply_seed_offset(raw, args.seed_offset)
        digest = cfgmod.config_hash(cfg)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, digest, args)
    except ConfigError as exc:
        print(f"{args.config}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
