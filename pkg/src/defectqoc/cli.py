"""Command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 ``--require-epsilon`` threshold
not met.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from . import harness
from .errors import DefectQOCError, ValidationError
from .grape import OptimizerConfig, optimize, prepare_targets
from .problems import load_problem, preset

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_THRESHOLD = 3


class _Unmet(Exception):
    pass


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # the subparser copy keeps main-parser values unless given again
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", type=Path, default=default, help="write results to this file")
    p.add_argument("--format", choices=harness.FORMATS, default=default,
                   help="output format (default: from --out suffix, else json)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                   help="worker threads for restarts (default 1)")
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)
    return p


def _problem_flags(p: argparse.ArgumentParser):
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--problem", help="preset name (see `catalog`)")
    group.add_argument("--problem-file", type=Path, help="JSON problem definition")
    p.add_argument("--t-adiabatic", type=float, default=None,
                   help="reference ramp duration (default from the problem)")
    p.add_argument("--n-adiabatic", type=int, default=None,
                   help="reference ramp segments (default from the problem)")


def _optimizer_flags(p: argparse.ArgumentParser, restarts: int = 100):
    p.add_argument("--restarts", type=int, default=restarts)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--max-iterations", type=int, default=10_000)
    p.add_argument("--epsilon", type=float, default=harness.DEFAULT_EPSILON,
                   help="target infidelity (default 1e-7)")
    p.add_argument("--require-epsilon", action="store_true",
                   help="exit with status 3 if epsilon is not reached")


def _grid_flags(p: argparse.ArgumentParser, required: bool):
    p.add_argument("--t-min", type=float, required=required)
    p.add_argument("--t-max", type=float, required=required)
    p.add_argument("--t-step", type=float, required=required)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="defectqoc", parents=[_global_flags(False)],
        description="Optimal control pulses for surface-code defect operations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_global_flags(True)]

    sub.add_parser("catalog", parents=common, help="list built-in problems")

    p = sub.add_parser("solve", parents=common, help="optimize at one duration")
    _problem_flags(p)
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--segments", type=int, required=True)
    _optimizer_flags(p)

    p = sub.add_parser("sweep", parents=common, help="drop-time sweep over a duration grid")
    _problem_flags(p)
    _grid_flags(p, required=True)
    p.add_argument("--segments", type=int, required=True)
    p.add_argument("--n-ramp", type=int, default=harness.DEFAULT_N_RAMP)
    _optimizer_flags(p)

    p = sub.add_parser("baseline", parents=common, help="linear-ramp infidelity curve")
    _problem_flags(p)
    p.add_argument("--t-grid", type=lambda s: [float(x) for x in s.split(",") if x.strip()],
                   help="comma-separated durations")
    _grid_flags(p, required=False)
    p.add_argument("--n-ramp", type=int, default=harness.DEFAULT_N_RAMP)

    p = sub.add_parser("blocks", parents=common, help="symmetry sectors, blocks and classes")
    _problem_flags(p)

    p = sub.add_parser("min-segments", parents=common, help="smallest segment count reaching epsilon")
    _problem_flags(p)
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--n-max", type=int, required=True)
    _optimizer_flags(p)

    p = sub.add_parser("table", parents=common, help="summary table over presets")
    p.add_argument("--problems", nargs="*", default=["creation", "deformation1", "injection2"])
    _optimizer_flags(p)
    return parser


def _problem(args):
    if args.problem_file is not None:
        return load_problem(args.problem_file)
    return preset(args.problem)


def _config(args) -> OptimizerConfig:
    return OptimizerConfig(restarts=args.restarts, master_seed=args.seed,
                           max_iterations=args.max_iterations, threads=args.threads)


def _targets(args, problem):
    return prepare_targets(problem, args.t_adiabatic, args.n_adiabatic)


def _grid(args) -> list[float]:
    if getattr(args, "t_grid", None):
        return args.t_grid
    if None in (args.t_min, args.t_max, args.t_step):
        raise ValidationError("give --t-grid or all of --t-min, --t-max, --t-step")
    return harness.t_grid(args.t_min, args.t_max, args.t_step)


def _run(args):
    cmd = args.command
    if cmd == "catalog":
        return harness.catalog()
    if cmd == "table":
        report = harness.table_report(args.problems, _config(args), args.epsilon)
        if args.require_epsilon and any(r.infidelity_opt is None for r in report.rows):
            raise _Unmet(report)
        return report
    problem = _problem(args)
    if cmd == "blocks":
        return harness.block_report(problem, args.t_adiabatic, args.n_adiabatic)
    if cmd == "baseline":
        points = harness.baseline_curve(problem, _grid(args), args.n_ramp, _targets(args, problem))
        return harness.BaselineResult(problem.name, args.n_ramp, points)
    targets = _targets(args, problem)
    if cmd == "solve":
        report = optimize(problem, args.time, args.segments, _config(args), targets=targets)
        met = report.best_infidelity <= args.epsilon
    elif cmd == "sweep":
        report = harness.sweep(problem, _grid(args), args.segments, _config(args),
                               args.epsilon, args.n_ramp, targets)
        met = report.drop_time is not None
    else:
        report = harness.min_segments(problem, args.time, args.n_max, _config(args),
                                      args.epsilon, targets)
        met = report.n_segments is not None
    if args.require_epsilon and not met:
        raise _Unmet(report)
    return report


def _write(args, result):
    fmt = args.format
    if fmt is None:
        suffix = args.out.suffix.lstrip(".").lower() if args.out else ""
        fmt = suffix if suffix in harness.FORMATS else "json"
    if args.out is not None:
        harness.emit(result, args.out, fmt)
    else:
        sys.stdout.write(harness.render(result, fmt))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _write(args, _run(args))
    except _Unmet as unmet:
        _write(args, unmet.args[0])
        print(f"epsilon {args.epsilon:g} not reached", file=sys.stderr)
        return EXIT_THRESHOLD
    except DefectQOCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
