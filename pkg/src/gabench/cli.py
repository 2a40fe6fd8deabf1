"""Command-line entry point: ``gabench validate | frontier | evaluate``.

Exit codes: 0 success, 1 validation findings, 2 IO/schema errors, 3 solver
failure (including an oracle cross-check mismatch).

Every flag can also be set through an environment variable named
``GABENCH_<FLAG>`` (dashes become underscores, e.g. ``GABENCH_TIME_LIMIT``);
explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .domain import Dataset, validate_dataset
from .frontier import classify_goal, extreme_efficient_set
from .gab import GroupStatus, apply_grouping, run_analysis
from .io_report import DatasetLoadError, SchemaError, ValidationError, load_dataset, render_report
from .oracle import OracleGuardError, enumerate_facets, oracle_solve_group
from .settings import EngineSettings, GroupingMode
from .solver_backend import BackendUnavailableError, get_backend

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3
ENV_PREFIX = "GABENCH_"
ORACLE_TOL = 1e-6

log = logging.getLogger("gabench")


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


def _env_flag(name: str) -> bool:
    return str(_env(name, "")).lower() in ("1", "true", "yes", "on")


def _env_float(name: str, default: float | None) -> float | None:
    raw = _env(name)
    return default if raw in (None, "") else float(raw)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", default=_env("data"), help="CSV directory, JSON file, or builtin:<name>")
    common.add_argument("--format", choices=["json", "csv", "text"], default=_env("format", "text"))
    common.add_argument("--out", default=_env("out"), help="write output here instead of stdout")
    common.add_argument("--grouping", choices=[m.value for m in GroupingMode],
                        default=_env("grouping", GroupingMode.PER_FILE.value))
    common.add_argument("--solver", default=_env("solver", "auto"), help="auto, scip or highs")
    common.add_argument("--time-limit", type=float, default=_env_float("time_limit", None))
    common.add_argument("--tol-feas", type=float, default=_env_float("tol_feas", 1e-7))
    common.add_argument("--tol-eff", type=float, default=_env_float("tol_eff", 1e-6))
    common.add_argument("--no-sos1", action="store_true", default=_env_flag("no_sos1"))
    common.add_argument("--oracle-check", action="store_true", default=_env_flag("oracle_check"),
                        help=argparse.SUPPRESS)
    common.add_argument("--dump-lp", default=_env("dump_lp"), metavar="DIR")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gabench", description="Goal-adjusted DEA benchmarking for incentive plans.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="load and validate a dataset")
    sub.add_parser("frontier", parents=[common], help="extreme-efficient set and goal classification")
    sub.add_parser("evaluate", parents=[common], help="solve every group and render the payment report")
    return parser


def settings_from_args(args: argparse.Namespace) -> EngineSettings:
    return EngineSettings(
        feasibility_tol=args.tol_feas,
        efficiency_tol=args.tol_eff,
        solver=args.solver,
        time_limit=args.time_limit,
        use_sos1=not args.no_sos1,
        grouping_mode=GroupingMode(args.grouping),
        dump_lp=args.dump_lp,
    )


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(args: argparse.Namespace) -> Dataset:
    if not args.data:
        raise SchemaError(["no dataset given (use --data or GABENCH_DATA)"])
    return load_dataset(args.data, validate=False)


def cmd_validate(args: argparse.Namespace) -> int:
    dataset = _load(args)
    violations = validate_dataset(dataset)
    for v in violations:
        print(v, file=sys.stderr)
    if violations:
        return EXIT_VALIDATION
    print(f"ok: {dataset.n} DMUs, {dataset.s} indicators, {len(dataset.grouping.groups)} groups")
    return EXIT_OK


def cmd_frontier(args: argparse.Namespace) -> int:
    dataset = _load(args)
    violations = validate_dataset(dataset)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return EXIT_VALIDATION
    settings = settings_from_args(args)
    efficient = extreme_efficient_set(dataset, settings.efficiency_tol, settings.feasibility_tol)
    labels = {d.id: classify_goal(d.goals, efficient, feasibility_tol=settings.feasibility_tol).value
              for d in dataset.dmus}
    if args.format == "json":
        text = json.dumps({"efficient_set": list(efficient.members), "classification": labels}, indent=2) + "\n"
    elif args.format == "csv":
        lines = ["dmu_id,extreme_efficient,classification"]
        lines += [f"{d},{str(d in efficient.members).lower()},{c}" for d, c in labels.items()]
        text = "\n".join(lines) + "\n"
    else:
        width = max(len(d) for d in labels)
        lines = [f"E = {{{', '.join(efficient.members)}}}", ""]
        lines += [f"{d.ljust(width)}  {'E' if d in efficient.members else ' '}  {c}" for d, c in labels.items()]
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _oracle_check(dataset: Dataset, solutions, efficient) -> list[str]:
    problems = []
    try:
        facets = enumerate_facets(efficient, dataset)
    except OracleGuardError as exc:
        print(f"oracle check skipped: {exc}", file=sys.stderr)
        return problems
    for sol in solutions:
        if sol.objective is None:
            continue
        try:
            ref = oracle_solve_group(sol.dmu_ids, dataset, efficient, facets=facets)
        except OracleGuardError as exc:
            print(f"oracle check skipped for group {sol.group_id}: {exc}", file=sys.stderr)
            continue
        if abs(ref.objective - sol.objective) > ORACLE_TOL:
            problems.append(
                f"group {sol.group_id}: MILP objective {sol.objective:.9g} != oracle {ref.objective:.9g}"
            )
    return problems


def cmd_evaluate(args: argparse.Namespace) -> int:
    dataset = _load(args)
    violations = validate_dataset(dataset)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return EXIT_VALIDATION
    settings = settings_from_args(args)
    get_backend(settings.solver)
    dataset = apply_grouping(dataset, settings.grouping_mode)
    efficient = extreme_efficient_set(dataset, settings.efficiency_tol, settings.feasibility_tol)
    solutions = run_analysis(dataset, settings, efficient=efficient)
    _emit(render_report(solutions, dataset, args.format, efficient), args.out)

    failed = [s for s in solutions if s.status is not GroupStatus.OPTIMAL]
    if failed:
        print("group     status      message", file=sys.stderr)
        for s in solutions:
            print(f"{s.group_id:<9} {s.status.value:<11} {s.message}", file=sys.stderr)
        return EXIT_SOLVER
    if args.oracle_check:
        problems = _oracle_check(dataset, solutions, efficient)
        for p in problems:
            print(f"ORACLE MISMATCH {p}", file=sys.stderr)
        if problems:
            return EXIT_SOLVER
        print("oracle check passed", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "frontier": cmd_frontier, "evaluate": cmd_evaluate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        for e in exc.errors:
            print(e, file=sys.stderr)
        return EXIT_VALIDATION
    except DatasetLoadError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BackendUnavailableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
