"""Command line entry point: ``hartreelab <subcommand> --config FILE``.

Exit codes: 0 all checks pass, 1 a check failed (or a blowup run was refused),
2 the config is invalid, 3 the run itself failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as X
from .config import ConfigError, load

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

COMMANDS = {
    "simulate": X.simulate,
    "blowup": X.blowup,
    "check-identities": X.check_identities,
    "check-potential": X.check_potential,
    "check-cutoff": X.check_cutoff,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hartreelab", description="Hartree hierarchy virial experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, type=Path, help="YAML experiment file")
        s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path override, may be repeated (e.g. grid.n=32)")
        s.add_argument("--output-dir", type=Path, default=None)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        cfg = load(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = COMMANDS[args.command](cfg, args.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except X.PositiveEnergyError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CHECK
    except (X.SolverFailure, FloatingPointError, ArithmeticError, MemoryError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for line in report.lines():
        print(line)
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
