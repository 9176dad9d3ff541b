"""Command line entry point ``cbl``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import KINDS, SCHEMA
from .harness import EXIT_CONFIG, emit_report, run_experiment


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cbl",
        description="Spectral simulation and verification runs for Boussinesq flow near Couette.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run the {kind} experiment")
        s.add_argument("--config", help="JSON config file (defaults used if omitted)")
        s.add_argument("--out", help="run directory (default: $CBL_OUT_ROOT/<kind>-<hash>-s<seed>)")
        s.add_argument("--jobs", type=int, default=None,
                       help="worker processes (default: logical cores)")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--plot", action="store_true", help="write SVG plots")
    r = sub.add_parser("report", help="summarize a run directory and regenerate its plots")
    r.add_argument("run_dir")
    sub.add_parser("schema", help="print the config JSON schema")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "schema":
        print(json.dumps(SCHEMA, indent=2))
        return 0
    if args.command == "report":
        text, code = emit_report(args.run_dir)
        (sys.stdout if code != EXIT_CONFIG else sys.stderr).write(text if text.endswith("\n") else text + "\n")
        return code
    if args.seed is not None and args.seed < 0:
        print("cbl: --seed must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs is not None and args.jobs < 1:
        print("cbl: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    code, out_dir = run_experiment(args.command, args.config, args.out, args.jobs, args.seed,
                                   args.plot)
    if out_dir is not None:
        print(f"{args.command}: exit {code}, outputs in {out_dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
