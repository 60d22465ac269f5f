"""Command-line entry point."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .harness.driver import run_scenario
from .harness.report import write_report
from .harness.scenario import apply_overrides, load_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bagchain")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file and write a report")
    run.add_argument("scenario", help="path to a scenario file")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--out", default="out", help="report output directory")
    run.add_argument("--cfs", choices=["on", "off"], default=None, help="override fork sharing")
    run.add_argument(
        "--sweep",
        default=None,
        metavar="KEY=V1,V2,...",
        help="rerun the scenario once per value of a scenario key",
    )
    run.add_argument("--plots", action="store_true", help="also render figures")
    run.add_argument("--parallel", action="store_true", help="step miners on a thread pool")
    return parser


def _fail(code: str, message: str) -> int:
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)
    return 1


def _run_one(scenario, out_dir: str, plots: bool, parallel: bool) -> "object":
    result = run_scenario(scenario, parallel=parallel)
    write_report(result, out_dir, plots=plots)
    return result


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except FileNotFoundError:
        return _fail("scenario-not-found", args.scenario)
    except ValueError as exc:
        return _fail("scenario-invalid", str(exc))

    overrides: dict[str, str] = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.cfs is not None:
        overrides["cfs"] = args.cfs
    try:
        scenario = apply_overrides(scenario, overrides)
    except ValueError as exc:
        return _fail("override-invalid", str(exc))

    if args.sweep is None:
        result = _run_one(scenario, args.out, args.plots, args.parallel)
        print(f"report written to {args.out} ({len(result.records)} heights)")
        return 0

    key, _, raw_values = args.sweep.partition("=")
    values = [v for v in raw_values.split(",") if v]
    if not key or not values:
        return _fail("sweep-invalid", "expected KEY=V1,V2,...")
    rows = []
    for value in values:
        try:
            variant = apply_overrides(scenario, {key: value})
        except ValueError as exc:
            return _fail("sweep-invalid", str(exc))
        sub_dir = os.path.join(args.out, f"{key}={value}")
        result = _run_one(variant, sub_dir, args.plots, args.parallel)
        rows.append((value, result))
        print(f"{key}={value}: mean_accuracy={result.mean_accuracy:.6f}")
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([key, "mean_accuracy", "wastage", "rounds_used", "converged"])
        for value, result in rows:
            writer.writerow(
                [
                    value,
                    f"{result.mean_accuracy:.6f}",
                    f"{result.wastage:.6f}",
                    result.rounds_used,
                    str(result.converged).lower(),
                ]
            )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return _fail("unknown-command", str(args.command))


if __name__ == "__main__":
    sys.exit(main())
