"""Command line front-end: ``solve``, ``synth`` and ``check`` subcommands.

Exit codes: 0 success, 2 configuration error, 3 invariant failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .core import ConfigError
from .harness import (
    ExperimentConfig,
    SyntheticSpec,
    check_invariants,
    generate_synthetic,
    run_experiment,
)
from .mmio import MatrixMarketError, save_dense
from .solvers import ALGORITHMS


def _parse_synthetic(text):
    parts = text.split(",")
    if len(parts) != 4:
        raise ConfigError("--synthetic expects M,N,R,NOISE")
    try:
        m, n, r = int(parts[0]), int(parts[1]), int(parts[2])
        noise = float(parts[3])
    except ValueError as exc:
        raise ConfigError(f"bad --synthetic value: {exc}") from exc
    return m, n, r, noise


def _jobs_default():
    env = os.environ.get("B2B_JOBS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="b2bopt",
        description="Bregman block solvers benchmark harness for NMF")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run solvers on a dataset or synthetic instance")
    src = solve.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", metavar="PATH", help="MatrixMarket file")
    src.add_argument("--synthetic", metavar="M,N,R,NOISE",
                     help="generate an M x N rank-R instance with the given noise level")
    solve.add_argument("--rank", type=int, required=True, metavar="K")
    solve.add_argument("--algo", default="gb2b",
                       help=f"comma-separated list from {','.join(ALGORITHMS)}")
    solve.add_argument("--eps", type=float, default=1e-4)
    solve.add_argument("--max-iter", type=int, default=1000)
    solve.add_argument("--iter-unit", choices=("epoch", "block"), default="epoch")
    solve.add_argument("--trials", type=int, default=1)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--jobs", type=int, default=_jobs_default())
    solve.add_argument("--assert", dest="assertions",
                       action=argparse.BooleanOptionalAction, default=False,
                       help="certify descent/rate inequalities on every update")
    solve.add_argument("--out", default="results", metavar="DIR")

    synth = sub.add_parser("synth", help="write a synthetic instance to a MatrixMarket file")
    synth.add_argument("--synthetic", metavar="M,N,R,NOISE", required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True, metavar="FILE")

    check = sub.add_parser("check", help="run the invariant suites")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--out", default="", metavar="FILE",
                       help="optional JSON report path")
    return parser


def cmd_solve(args):
    if args.synthetic:
        m, n, r, noise = _parse_synthetic(args.synthetic)
        source = SyntheticSpec(m, n, r, noise, args.seed)
    else:
        source = args.data
    algorithms = tuple(a.strip() for a in args.algo.split(",") if a.strip())
    config = ExperimentConfig(
        data_source=source, rank=args.rank, algorithms=algorithms,
        epsilon=args.eps, max_iter=args.max_iter, trials=args.trials,
        seed=args.seed, assertions=args.assertions, iter_unit=args.iter_unit,
        output_dir=args.out, jobs=args.jobs)
    summary = run_experiment(config)
    for algo, stats in summary.aggregates().items():
        parts = [f"{algo}: trials={stats['trials']}"]
        for key in ("iterations_mean", "final_rel_residual_mean", "final_rel_proj_grad_mean"):
            if key in stats:
                parts.append(f"{key.replace('_mean', '')}={stats[key]:.4g}")
        print("  ".join(parts))
    errors = [r for r in summary.rows if r.error]
    for r in errors:
        print(f"error: {r.algorithm} trial {r.trial}: {r.error}", file=sys.stderr)
    print(f"traces and summary written to {config.output_dir}")
    return 0


def cmd_synth(args):
    m, n, r, noise = _parse_synthetic(args.synthetic)
    A, _, _ = generate_synthetic(m, n, r, noise, args.seed)
    save_dense(args.out, A)
    print(f"wrote {m} x {n} rank-{r} instance (noise {noise:g}) to {args.out}")
    return 0


def cmd_check(args):
    passed, report = check_invariants(seed=args.seed, verbose=True)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            json.dump({"passed": passed, "checks": report}, fh, indent=2)
        print(f"report written to {args.out}")
    return 0 if passed else 3


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "synth":
            return cmd_synth(args)
        return cmd_check(args)
    except (ConfigError, MatrixMarketError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
