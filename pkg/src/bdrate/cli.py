"""Command-line entry point: ``bdrate {run,cross-check,lyapunov,validate} CONFIG``.

Exit status is 0 iff every pass flag of the report is true (or, for ``validate``,
iff the config is valid).
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .evolution import BudgetExceeded
from .harness import cross_check, run_experiment, run_lyapunov

log = logging.getLogger("bdrate")

COMMANDS = {"run": run_experiment, "cross-check": cross_check, "lyapunov": run_lyapunov}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdrate", description="Boundary distortion rate experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "estimate distortion rates (or symbolic rates) along the configured ladder"),
        ("cross-check", "compare the covering-number estimator with the distortion estimator"),
        ("lyapunov", "estimate the Lyapunov spectrum and compare with its oracle"),
        ("validate", "parse and validate a config file"),
    ]:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config")
        if name != "validate":
            sp.add_argument("-o", "--output-dir", help="override the configured output directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(f"{args.config}: ok ({cfg.kind})")
        return 0
    try:
        report = COMMANDS[args.command](cfg)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.output_dir or cfg.resolved_output_dir()
    csv_path, txt_path = report.write(out_dir)
    sys.stdout.write(report.text())
    log.info("wrote %s and %s", csv_path, txt_path)
    return 0 if report.all_pass else 1


if __name__ == "__main__":
    sys.exit(main())
