"""Command-line front end: `swarmsafe {validate,run,suite}`.

Exit codes are a stable contract: 0 ok, 1 invalid scenario, 2 parse error,
3 degraded safety during a run, 4 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import sim
from .model import ConfigurationError, validate
from .scenario_io import ScenarioParseError, load_scenario, reference_scenario_path

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARSE = 2
EXIT_DEGRADED = 3
EXIT_RUNTIME = 4

log = logging.getLogger("swarmsafe")


def _setup_logging() -> None:
    level = os.environ.get("SWARMSAFE_LOG", "info").lower()
    numeric = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        level, logging.INFO
    )
    logging.basicConfig(level=numeric, format="%(levelname)s %(name)s: %(message)s")


def _load(path: str, overrides: list[str]):
    try:
        return load_scenario(path, overrides), EXIT_OK
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return None, EXIT_PARSE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None, EXIT_PARSE


def cmd_validate(args) -> int:
    scenario, code = _load(args.scenario, args.override)
    if scenario is None:
        return code
    violations = validate(scenario)
    if violations:
        for v in violations:
            print(v)
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_run(args) -> int:
    scenario, code = _load(args.scenario, args.override)
    if scenario is None:
        return code
    violations = validate(scenario)
    if violations:
        for v in violations:
            print(v)
        return EXIT_INVALID
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = sim.run(scenario, trace=args.trace)
    except sim.SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    sim.write_csv(result, out_dir / "trajectory.csv")
    sim.write_metrics(result, out_dir / "metrics.json", scenario)
    if args.trace:
        sim.write_trace(result, out_dir / "trace.jsonl")
    print(f"min_h = {result.min_h:.6g}")
    print(f"max rounds used = {result.max_rounds_used}, "
          f"convergence failures = {result.convergence_failures}, "
          f"degraded events = {result.degraded_events}")
    log.info("wall time %.2f s, outputs in %s", result.wall_time, out_dir)
    if result.degraded_events > 0:
        return EXIT_DEGRADED
    return EXIT_OK


def cmd_suite(_args) -> int:
    from .checks import run_all_suites

    results = run_all_suites()
    width = max(len(f"{r.suite}: {r.name}") for r in results)
    all_ok = True
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        print(f"{flag}  {f'{r.suite}: {r.name}':<{width}}  {r.detail}")
        all_ok &= r.passed
    return EXIT_OK if all_ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmsafe",
        description="Collaborative safety-filtered formation control simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("scenario", help="path to scenario TOML")
    p_val.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="override sim/gains keys")
    p_val.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="simulate a scenario")
    p_run.add_argument("scenario", help="path to scenario TOML")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--trace", action="store_true", help="write message trace")
    p_run.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="override sim/gains keys")
    p_run.set_defaults(func=cmd_run)

    p_suite = sub.add_parser("suite", help="run the property suites")
    p_suite.set_defaults(func=cmd_suite)

    p_ref = sub.add_parser("reference", help="print the reference scenario path")
    p_ref.set_defaults(func=lambda _a: (print(reference_scenario_path()), EXIT_OK)[1])
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - contract: runtime errors exit 4
        log.error("unhandled error: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
