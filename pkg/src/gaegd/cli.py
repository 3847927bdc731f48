"""Command line entry point: ``gaegd {run,tune,sweep-c,verify,report}``.

Exit codes: 0 success, 1 a check failed (``verify``) or no grid point
reached the target (``tune``), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench, verification

SPEC_FLAGS = {
    "objective": str,
    "algo": str,
    "energy": str,
    "eta": float,
    "c": float,
    "r0": float,
    "target": float,
    "metric": str,
    "max_iters": int,
    "variant": str,
    "beta": float,
    "repeats": int,
    "seed": int,
    "out_dir": str,
}


class UsageError(Exception):
    pass


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with ExperimentSpec fields")
    for name, typ in SPEC_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--svg", action="store_true", default=None, help="also render SVG plots")


def _spec(args, **extra) -> bench.ExperimentSpec:
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot read config {args.config}: {err}") from None
    for name in list(SPEC_FLAGS) + ["svg"]:
        val = getattr(args, name)
        if val is not None:
            data[name] = val
    data.update({k: v for k, v in extra.items() if v is not None})
    try:
        return bench.ExperimentSpec.from_dict(data)
    except (TypeError, ValueError) as err:
        raise UsageError(str(err)) from None


def cmd_run(args) -> int:
    spec = _spec(args)
    if spec.eta is None:
        raise UsageError("run needs --eta (or eta in the config)")
    result, _ = bench.run_experiment(spec)
    print(json.dumps(result.to_dict(), indent=2))
    return 0


def _grid_extra(args):
    return {"eta_range": args.eta_range, "eta_grid": args.eta_grid}


def cmd_tune(args) -> int:
    spec = _spec(args, **_grid_extra(args))
    try:
        tuned = bench.tune_lr(spec, workers=args.workers)
    except bench.TuningError as err:
        print(f"tuning failed: {err}", file=sys.stderr)
        for row in err.table:
            print(f"  eta={row.eta:<12.6g} {row.stop_reason}", file=sys.stderr)
        return 1
    except ValueError as err:
        raise UsageError(str(err)) from None
    print(f"best eta {tuned.best_eta:.6g}: {tuned.best_iterations} iterations "
          f"({len(tuned.table)} grid points)")
    return 0


def cmd_sweep(args) -> int:
    spec = _spec(args, **_grid_extra(args))
    if spec.eta_grid is None and spec.eta_range is None:
        raise UsageError("sweep-c needs --eta-range or --eta-grid")
    rows = bench.sweep_c(spec, args.c_values, workers=args.workers)
    print(f"{'c':>8} {'best_eta':>12} {'iterations':>10}")
    for r in rows:
        eta = "-" if r.best_eta is None else f"{r.best_eta:.6g}"
        its = "-" if r.iterations is None else str(r.iterations)
        print(f"{r.c:>8g} {eta:>12} {its:>10}" + (f"  ({r.error})" if r.error else ""))
    return 0


def cmd_verify(args) -> int:
    try:
        checks = verification.verify_matrix(args.energies, args.etas, args.objectives,
                                            args.steps, args.c, args.tol)
    except ValueError as err:
        raise UsageError(str(err)) from None
    failed = [c for c in checks if not c.passed]
    for c in checks if args.verbose else failed:
        print(c.line())
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


def cmd_report(args) -> int:
    root = Path(args.out_dir)
    if not root.is_dir():
        raise UsageError(f"no such directory: {root}")
    path = bench.build_report(root, svg=bool(args.svg))
    print(path.read_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaegd", description="Energy-adaptive gradient descent experiments")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    _add_spec_flags(p)
    p.set_defaults(func=cmd_run)

    for name, func, help_ in (("tune", cmd_tune, "tune the base step size on a grid"),
                              ("sweep-c", cmd_sweep, "tune the step size for several shifts c")):
        p = sub.add_parser(name, help=help_)
        _add_spec_flags(p)
        g = p.add_mutually_exclusive_group()
        g.add_argument("--eta-range", nargs=2, type=float, metavar=("LO", "HI"))
        g.add_argument("--eta-grid", nargs="+", type=float)
        p.add_argument("--workers", type=int, default=1)
        if name == "sweep-c":
            p.add_argument("--c-values", nargs="*", type=float, default=[1.0, 10.0, 100.0, 1000.0])
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="check the invariants over a matrix of runs")
    p.add_argument("--energies", nargs="+", default=list(verification.DEFAULT_ENERGIES))
    p.add_argument("--etas", nargs="+", type=float, default=list(verification.DEFAULT_ETAS))
    p.add_argument("--objectives", nargs="+", default=list(verification.DEFAULT_OBJECTIVES))
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="summarise stored results and write plot data")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper())
    try:
        return args.func(args)
    except UsageError as err:
        parser.error(str(err))  # exits with status 2


if __name__ == "__main__":
    sys.exit(main())
