#!/usr/bin/env python3
"""Certificate suite runner.

This module runs the curvature certificates of a scenario file and can be
used as:
1. Library: import run_config_file() or the carnot_lab.runner API
2. CLI: run directly or via cli.py

Exit codes: 0 when no certificate failed, 2 when at least one did,
1 on configuration or runtime errors.
"""
import argparse
import os
import sys
from typing import List, Optional

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from carnot_lab.certify import CERTIFIERS
from carnot_lab.colors import bold, error, header, info, success, verdict, warn
from carnot_lab.errors import LabError
from carnot_lab.runner import (EXIT_ERROR, RunConfig, RunSummary, exit_code_for, run,
                               sweep)
from carnot_lab.scenarios.config import load_config
from carnot_lab.utils import format_value, set_verbose


def print_summary(summary: RunSummary) -> None:
    counts = summary.counts
    print(header(f"[{summary.name}] {summary.fingerprint[:12]}"))
    print(f"    pass={counts['pass']} fail={counts['fail']} degenerate={counts['degenerate']}")
    if summary.skipped:
        print(warn(f"    skipped after failed self-checks: {', '.join(summary.skipped)}"))
    if summary.c_hat:
        table = ", ".join(f"t={t:g}: {v:.4f}" for t, v in summary.c_hat.items())
        print(info(f"    c-hat: {table}"))
    for r in summary.failures:
        print(f"    {verdict(r.verdict.value)} {r.name} [{r.case}] "
              f"lhs={format_value(r.lhs)} rhs={format_value(r.rhs)}")
    print(f"[+] Reports written to {summary.out_dir}")


def run_config_file(path: str, suite: Optional[List[str]] = None, **overrides) -> RunSummary:
    """Load a scenario file and run it; overrides are RunConfig fields."""
    return run(RunConfig(load_config(path), tuple(suite or ()), **overrides))


def _split(values: Optional[str]) -> List[str]:
    if not values:
        return []
    return [v.strip() for v in values.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    argparser = argparse.ArgumentParser(
        description="Heat flow, transport and curvature certificates on Carnot-type groups")
    argparser.add_argument("-v", "--verbose", action="store_true",
                           help="Enable verbose output (per-certifier timings)")
    argparser.add_argument("-d", "--debug", action="store_true",
                           help="Enable debug output (operators, caches, solver decisions)")
    sub = argparser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="Path to a TOML scenario file")
    common.add_argument("--suite", default=None,
                        help=f"Comma-separated certifiers (default all): {', '.join(CERTIFIERS)}")
    common.add_argument("--out", default=None, help="Output directory (env CARNOT_LAB_OUT)")
    common.add_argument("--format", choices=("json", "csv", "both"), default=None,
                        help="Report file format")
    common.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    common.add_argument("--jobs", type=int, default=None,
                        help="Concurrent certifiers (env CARNOT_LAB_JOBS)")

    sub.add_parser("run", parents=[common], help="Run the certificate suite once")
    sweep_parser = sub.add_parser("sweep", parents=[common],
                                  help="Re-run the suite over values of one parameter")
    sweep_parser.add_argument("--param", required=True,
                              help="shape, spacing, times, radius, eps or a dotted config path")
    sweep_parser.add_argument("--values", required=True, help="Comma-separated values")
    return argparser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_verbose(args.verbose, args.debug)

    try:
        print(f"[*] Loading scenario: {args.config}")
        run_config = RunConfig(load_config(args.config), tuple(_split(args.suite)), args.out,
                               args.format, args.seed, args.jobs)
        if args.command == "run":
            summaries = [run(run_config)]
        else:
            values = _split(args.values)
            print(f"[*] Sweeping {args.param} over {', '.join(values)}")
            summaries = sweep(run_config, args.param, values)
    except LabError as e:
        print(error(f"[!] Error: {e}"))
        return EXIT_ERROR

    print()
    for summary in summaries:
        print_summary(summary)
    code = exit_code_for(summaries)
    print("=" * 50)
    status = success("all certificates hold") if code == 0 else error("failures reported")
    print(bold(f"[*] Done: {status} (exit {code})"))
    return code


if __name__ == "__main__":
    sys.exit(main())
