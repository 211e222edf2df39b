"""Command-line interface: norm computations, data splitting, estimate
verification, solver runs, and archived-report inspection.

Exit codes: 0 success, 2 validation error, 3 solver divergence,
4 gate failure (a checked invariant did not hold).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .besov import (BesovIndex, besov_norm, critical_exponent,
                    default_partition)
from .calderon import SplitConfig, exponent_sweep, split
from .diagnostics import (ExperimentConfig, atomic_write_text, rescale,
                          run_experiment, vanishing_test)
from .errors import NseLabError, PicardDivergenceError
from .heat import heat_trajectory, verify_kato_estimate
from .spectral import Grid, read_clf1, write_clf1

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3
EXIT_GATE = 4


def _common(sub):
    sub.add_argument("--grid", type=int, default=32,
                     help="points per axis (default 32)")
    sub.add_argument("--box", type=float, default=2.0 * math.pi,
                     help="box side length (default 2*pi)")
    sub.add_argument("--dim", type=int, default=3, choices=(2, 3))
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--format", choices=("json", "csv"), default="json")


def _emit(args, payload: dict, name: str):
    if args.format == "csv":
        keys = sorted(payload)
        text = ",".join(keys) + "\n" + ",".join(
            json.dumps(payload[k]) if not isinstance(payload[k], float)
            else repr(payload[k]) for k in keys) + "\n"
    else:
        text = json.dumps(payload, indent=2, sort_keys=True,
                          default=lambda o: o.tolist()
                          if isinstance(o, np.ndarray) else o) + "\n"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        ext = "csv" if args.format == "csv" else "json"
        atomic_write_text(os.path.join(args.out, f"{name}.{ext}"), text)
    sys.stdout.write(text)


def cmd_partition_check(args) -> int:
    grid = Grid(args.dim, args.grid, args.box)
    part = default_partition(grid)
    dev = part.partition_deviation()
    _emit(args, {"j_min": part.j_min, "j_max": part.j_max,
                 "partition_deviation": dev}, "partition-check")
    return EXIT_OK if dev < 1e-10 else EXIT_GATE


def cmd_norm(args) -> int:
    field = read_clf1(args.infile)
    part = default_partition(field.grid)
    idx = BesovIndex(args.s if args.s is not None
                     else critical_exponent(args.p), args.p, args.q)
    rep = besov_norm(field.zero_mean(), idx, part)
    _emit(args, json.loads(rep.to_json()), "norm")
    return EXIT_OK


def cmd_split(args) -> int:
    field = read_clf1(args.infile)
    part = default_partition(field.grid)
    cfg = SplitConfig(args.p, args.q, getattr(args, "lambda"))
    res = split(field, cfg, part)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_clf1(os.path.join(args.out, "U0.clf1"), res.large)
        write_clf1(os.path.join(args.out, "V0.clf1"), res.small)
    _emit(args, res.summary(), "split")
    return EXIT_OK


def cmd_sweep(args) -> int:
    field = read_clf1(args.infile)
    part = default_partition(field.grid)
    cfg = SplitConfig(args.p, args.q, 1.0)
    lams = np.geomspace(args.lambda_min, args.lambda_max, args.n_lambda)
    rep = exponent_sweep(field, cfg, lams, part)
    _emit(args, json.loads(rep.to_json()), "sweep")
    return EXIT_OK


def cmd_heat_verify(args) -> int:
    from .families import random_power_law
    from .besov import Trajectory
    from .spectral import dealias_product
    from .heat import time_schedule

    grid = Grid(args.dim, args.grid, args.box)
    u = random_power_law(grid, alpha=2.0, seed=args.seed)
    times = time_schedule(args.horizon, 16, 16, include_zero=False)
    flows = heat_trajectory(u, times)
    tensors = Trajectory(grid, times,
                         [dealias_product(f, f) for f in flows.fields])
    rep = verify_kato_estimate(tensors, args.s1, args.p1, args.p2)
    _emit(args, rep, "heat-verify")
    return EXIT_OK


def cmd_solve(args) -> int:
    recipe = {"family": args.family}
    if args.family == "random":
        recipe["amplitude"] = args.amplitude
    cfg = ExperimentConfig(dim=args.dim, n=args.grid, box_length=args.box,
                           horizon=args.horizon, recipe=recipe,
                           solver=args.solver, out_dir=args.out,
                           seed=args.seed)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = ExperimentConfig.from_json(fh.read())
        if args.out:
            cfg.out_dir = args.out
    report = run_experiment(cfg)
    _emit(args, report.summary(), "solve")
    if report.status == "completed":
        return EXIT_OK
    return EXIT_DIVERGENCE


def cmd_rescale(args) -> int:
    field = read_clf1(args.infile)
    out = rescale(field, getattr(args, "lambda"))
    write_clf1(args.outfile, out)
    _emit(args, {"lambda": getattr(args, "lambda"),
                 "box_length": out.grid.box_length,
                 "outfile": args.outfile}, "rescale")
    return EXIT_OK


def cmd_vanish(args) -> int:
    field = read_clf1(args.infile)
    lams = np.array([float(s) for s in args.lambdas.split(",")])
    series = vanishing_test(field, lams)
    _emit(args, {"lambdas": lams.tolist(), "pairings": series.tolist()},
          "vanish")
    return EXIT_OK


def cmd_report(args) -> int:
    path = os.path.join(args.archive, "manifest.json")
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    _emit(args, manifest["summary"], "report")
    status = manifest["summary"].get("status")
    return EXIT_OK if status == "completed" else EXIT_GATE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nse-lab",
        description="Spectral laboratory for critical-norm fluid "
                    "diagnostics on periodic grids.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("partition-check",
                        help="dyadic partition-of-unity deviation")
    _common(p)
    p.set_defaults(fn=cmd_partition_check)

    p = subs.add_parser("norm", help="Besov norm of a CLF1 field")
    _common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--s", type=float, default=None,
                   help="regularity (default: critical for p)")
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--q", type=float, default=4.0)
    p.set_defaults(fn=cmd_norm)

    p = subs.add_parser("split", help="threshold split of critical data")
    _common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--q", type=float, default=8.0)
    p.add_argument("--lambda", type=float, default=1.0)
    p.set_defaults(fn=cmd_split)

    p = subs.add_parser("sweep", help="threshold exponent-law sweep")
    _common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--q", type=float, default=8.0)
    p.add_argument("--lambda-min", type=float, default=1e-2)
    p.add_argument("--lambda-max", type=float, default=1e2)
    p.add_argument("--n-lambda", type=int, default=13)
    p.set_defaults(fn=cmd_sweep)

    p = subs.add_parser("heat-verify",
                        help="measured Duhamel smoothing constant")
    _common(p)
    p.add_argument("--s1", type=float, default=-0.5)
    p.add_argument("--p1", type=float, default=2.0)
    p.add_argument("--p2", type=float, default=4.0)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_heat_verify)

    p = subs.add_parser("solve", help="run and archive a solver experiment")
    _common(p)
    p.add_argument("--family", default="taylor-green",
                   choices=("taylor-green", "abc", "random", "zero"))
    p.add_argument("--solver", default="direct",
                   choices=("direct", "split-perturbed", "mollified"))
    p.add_argument("--T", dest="horizon", type=float, default=1.0)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help="JSON experiment config")
    p.set_defaults(fn=cmd_solve)

    p = subs.add_parser("rescale", help="apply the scaling symmetry")
    _common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--lambda", type=float, required=True)
    p.add_argument("--outfile", required=True)
    p.set_defaults(fn=cmd_rescale)

    p = subs.add_parser("vanish", help="small-scale pairing series")
    _common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--lambdas", required=True,
                   help="comma-separated powers of 2")
    p.set_defaults(fn=cmd_vanish)

    p = subs.add_parser("report", help="summarize an archived run")
    _common(p)
    p.add_argument("--archive", required=True)
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except PicardDivergenceError as exc:
        sys.stderr.write(f"solver divergence: {exc}\n"
                         f"iterate norms: {exc.norms}\n")
        return EXIT_DIVERGENCE
    except (NseLabError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
