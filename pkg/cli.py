#!/usr/bin/env python3
"""
Command-line entry point.

Usage:
    python cli.py solve inst.json [--aleph 5] [--export-sdpa out.dat-s] [--json]
    python cli.py exact inst.json [--time-limit 90] [--method bb|enum]
    python cli.py bench instances/ [--aleph 5 10 20] [--out results.csv] [--reproducible]
    python cli.py gen --n 30 --seed 1 -o inst.json

Exit codes: 0 completed run, 2 parse or validation error, 3 solver failure.
Verbosity comes from CARDSDP_LOG (debug/info/warning/error).
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from core import bench, cardopt, exact, ipm
from core.errors import CardSdpError, ParseError, TooLarge, ValidationError
from core.instance import GenSpec, generate_instance, load_instance, save_instance
from core.sdp import Budget, build_sdp
from core.sdpa import write_sdpa
from utils import config
from utils.formatting import format_aggregate, format_exact_result, format_run_report

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3


def _solver_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--gap-tol", type=float, default=1e-8, help="relative duality gap tolerance")
    parser.add_argument("--feas-tol", type=float, default=1e-8, help="relative residual tolerance")
    parser.add_argument("--max-iter", type=int, default=100, help="interior-point iteration cap")
    parser.add_argument("--budget", choices=[b.value for b in Budget], default=Budget.AT_MOST.value,
                        help="budget row: le (sum x <= 1) or eq (sum x = 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cardsdp",
        description="SDP lower bounds for cardinality-constrained portfolio selection",
    )
    parser.add_argument("--log", default=None, help=f"log level (overrides {config.LOG_ENV_VAR})")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="relaxation bound, rounding and gap for one instance")
    solve.add_argument("instance", help="canonical JSON instance file")
    solve.add_argument("--aleph", type=int, default=None, help="override the cardinality cap")
    _solver_flags(solve)
    solve.add_argument("--export-sdpa", metavar="FILE", default=None,
                       help="write the relaxation in sparse SDPA format before solving")
    solve.add_argument("--json", action="store_true", help="print the report as JSON")
    solve.add_argument("--out", default=None, help="also write the JSON report to this file")
    solve.add_argument("--verbose", action="store_true", help="show the interior-point iteration log")

    ex = sub.add_parser("exact", help="exact optimum by branch-and-bound or enumeration")
    ex.add_argument("instance")
    ex.add_argument("--aleph", type=int, default=None)
    ex.add_argument("--method", choices=["bb", "enum"], default="bb")
    ex.add_argument("--time-limit", type=float, default=config.DEFAULT_TIME_LIMIT)
    ex.add_argument("--node-limit", type=int, default=None)
    ex.add_argument("--jobs", type=int, default=config.DEFAULT_JOBS)
    ex.add_argument("--no-seed", action="store_true", help="skip the relaxation-based incumbent")
    ex.add_argument("--budget", choices=[b.value for b in Budget], default=Budget.AT_MOST.value)
    ex.add_argument("--json", action="store_true")

    bn = sub.add_parser("bench", help="run both pipelines over a directory of instances")
    bn.add_argument("directory")
    bn.add_argument("--aleph", type=int, nargs="+", default=None,
                    help="cardinality caps to test (default: each file's own)")
    bn.add_argument("--time-limit", type=float, default=config.DEFAULT_TIME_LIMIT)
    bn.add_argument("--node-limit", type=int, default=None)
    bn.add_argument("--jobs", type=int, default=config.DEFAULT_JOBS)
    bn.add_argument("--out", default="bench.csv", help="per-instance CSV (aggregate goes next to it)")
    bn.add_argument("--reproducible", action="store_true",
                    help="node limit instead of wall clock and zeroed timings")
    _solver_flags(bn)

    gen = sub.add_parser("gen", help="write a synthetic factor-model instance")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--factors", type=int, default=3)
    gen.add_argument("--rho-quantile", type=float, default=0.5)
    gen.add_argument("--factor-scale", type=float, default=0.05,
                     help="loading scale s in Q = s²FFᵀ + D")
    gen.add_argument("--rho-fraction", type=float, default=0.25,
                     help="rho as a fraction of the quantile return")
    gen.add_argument("--aleph", type=int, default=None)
    gen.add_argument("--name", default="")
    gen.add_argument("-o", "--out", required=True)
    return parser


def _solver_config(args, verbose: bool = False) -> ipm.SolverConfig:
    return ipm.SolverConfig(gap_tol=args.gap_tol, feas_tol=args.feas_tol,
                            max_iter=args.max_iter, verbose=verbose)


def _load(args):
    inst = load_instance(args.instance)
    if args.aleph is not None:
        inst = inst.with_aleph(args.aleph)
    return inst


def cmd_solve(args) -> int:
    inst = _load(args)
    budget = Budget(args.budget)
    cfg = _solver_config(args, verbose=args.verbose or config.iteration_log_enabled(args.log))
    if args.export_sdpa:
        path = write_sdpa(build_sdp(inst, budget), args.export_sdpa)
        print(f"wrote {path}")

    report = cardopt.run(inst, cfg, budget)
    payload = report.to_dict()
    if args.json:
        print(json.dumps(payload, indent=2, default=str))
    else:
        print(format_run_report(report))
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, default=str) + "\n", encoding="utf-8")

    crashed = report.stats is None and report.sdp_status != ipm.SolveStatus.PRIMAL_INFEASIBLE.value
    return EXIT_SOLVER if report.solver_failed or crashed else EXIT_OK


def cmd_exact(args) -> int:
    inst = _load(args)
    budget = Budget(args.budget)
    if args.method == "enum":
        result = exact.enumerate_supports(inst, budget)
    else:
        result = exact.branch_and_bound(inst, time_limit=args.time_limit, budget=budget,
                                        jobs=args.jobs, node_limit=args.node_limit,
                                        seed_with_sdp=not args.no_seed)
    if args.json:
        print(json.dumps(result.to_dict(), indent=2, default=str))
    else:
        print(format_exact_result(result, inst.name))
    return EXIT_OK


def cmd_bench(args) -> int:
    if not Path(args.directory).is_dir():
        raise ParseError(f"directory not found: {args.directory}")
    paths = bench.discover(args.directory)
    if not paths:
        raise ParseError(f"no *.json instances in {args.directory}")
    cfg = bench.BenchConfig(
        alephs=tuple(args.aleph or ()),
        time_limit=args.time_limit,
        node_limit=args.node_limit,
        jobs=args.jobs,
        budget=Budget(args.budget),
        solver=_solver_config(args),
        reproducible=args.reproducible,
    )
    rows = bench.run_bench(paths, cfg)
    first, second = bench.write_bench(rows, args.out)
    print(format_aggregate(bench.aggregate(rows)))
    print(f"wrote {first} and {second}")
    return EXIT_OK


def cmd_gen(args) -> int:
    spec = GenSpec(n=args.n, seed=args.seed, factor_count=args.factors,
                   target_rho_quantile=args.rho_quantile, aleph=args.aleph,
                   factor_scale=args.factor_scale, rho_fraction=args.rho_fraction)
    inst = generate_instance(spec, name=args.name)
    path = save_instance(inst, args.out)
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "exact": cmd_exact, "bench": cmd_bench, "gen": cmd_gen}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    config.configure_logging(args.log)

    try:
        return COMMANDS[args.command](args)
    except (ParseError, ValidationError, TooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CardSdpError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
