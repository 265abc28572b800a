"""Command line entry point.

``bridgelab run --config cfg.json [--out DIR] [--threads K]`` executes the
configured experiment and prints one pass/fail line per check; the exit
status is 0 only when every check passed (2 for configuration errors).
``bridgelab validate --config cfg.json`` checks the config without running.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .runner import ConfigError, load_config, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridgelab",
        description="Bridge-ensemble numerical laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the configured experiment")
    run_p.add_argument("--config", required=True, help="path to a JSON config file")
    run_p.add_argument("--out", default=None, help="output directory (overrides config)")
    run_p.add_argument(
        "--threads", type=int, default=1, help="worker threads for the full suite"
    )

    val_p = sub.add_parser("validate", help="validate a config file and exit")
    val_p.add_argument("--config", required=True, help="path to a JSON config file")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"config valid: experiment={cfg.experiment} seed={cfg.seed}")
        return 0

    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2

    report = run_experiment(cfg, threads=args.threads)
    for check in sorted(report.checks, key=lambda c: c.name):
        status = "PASS" if check.passed else "FAIL"
        print(
            f"[{status}] {check.name}: value={check.value:.6g} "
            f"tolerance={check.tolerance:.6g}"
        )
    print(f"report: {os.path.join(cfg.out_dir, 'report.json')}")
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
