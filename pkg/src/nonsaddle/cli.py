"""Command line entry point: ``nonsaddle <command> [config]``.

Exit status is 0 on success, 2 for configuration errors and 3 when a stage
fails. Failed cross-checks are reported in the JSON and do not change it.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .config import load_config
from .flowfield import ConfigError
from .grid import THREADS_ENV
from .pipeline import StageError, analyze, list_flows, report_json, run, write_report

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3

log = logging.getLogger("nonsaddle")

# stages each subcommand forces; None keeps the config's own list
_COMMAND_STAGES = {
    "analyze": None,
    "influence": ("classify", "influence"),
    "robustness": ("robustness",),
    "dump-cells": ("classify", "influence"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nonsaddle",
        description="Non-saddle set analysis of planar and toroidal flows on cubical grids.",
        epilog=f"Set {THREADS_ENV} to bound worker threads.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    lf = sub.add_parser("list-flows", help="print the flow catalogue")
    lf.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    for name, text in (
        ("analyze", "run the stages listed in the config"),
        ("influence", "block classification plus region-of-influence analysis"),
        ("robustness", "parameter continuation over [robustness] lambdas"),
        ("dump-cells", "write the CSV cell dumps only"),
    ):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config", help="INI configuration file")
        sp.add_argument("-o", "--output-dir", help="override [run] output_dir")
        sp.add_argument("--stdout", action="store_true", help="also print the report to stdout")
    return p


def _print_table(rows) -> None:
    width = max(len(r["id"]) for r in rows)
    for r in rows:
        params = ", ".join(f"{k}={v:g}" for k, v in r["params"].items()) or "-"
        print(f"{r['id']:<{width}}  {r['space']:<5}  {params:<16}  {r['formula']}")
        for k, doc in r["param_doc"].items():
            print(f"{'':<{width}}    {k}: {doc}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.command == "list-flows":
        rows = list_flows()
        if args.json:
            print(json.dumps(rows, indent=2))
        else:
            _print_table(rows)
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        changes = {}
        if args.output_dir:
            changes["output_dir"] = args.output_dir
        stages = _COMMAND_STAGES[args.command]
        if stages is not None:
            changes["stages"] = stages
        if changes:
            cfg = dataclasses.replace(cfg, **changes)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("running %s on %s at %d^2", args.command, cfg.flow_id, cfg.resolution)
    try:
        if args.command == "dump-cells":
            a = analyze(cfg)
            written = write_report(a, cells=True)
            for name in written[:-1]:
                print(name)
            return EXIT_OK
        a = run(cfg)
    except StageError as exc:
        print(f"stage error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.stdout:
        sys.stdout.write(report_json(a.report))
    else:
        print(f"verdict: {a.report.get('verdict')}")
        failed = [c["name"] for c in a.report["cross_checks"] if c["status"] == "fail"]
        print(f"cross-checks failed: {', '.join(failed) if failed else 'none'}")
        for name in a.artifacts:
            print(f"wrote {name}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
