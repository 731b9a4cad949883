"""Command-line entry point: ``oais run``, ``oais fit`` and ``oais check``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

import numpy as np

from .exceptions import OAISError
from .harness import (
    BOUND_KINDS,
    CSV_HEADER,
    ExperimentConfig,
    check_bounds,
    fit_rate,
    read_table,
    run_sweep,
    table_to_csv,
    table_to_json,
    write_table,
)


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    table = run_sweep(cfg, jobs=args.jobs)
    out = args.out or cfg.output
    if out:
        path = write_table(table, out, args.format)
        print(f"wrote {len(table.rows)} rows to {path}", file=sys.stderr)
    else:
        sys.stdout.write(table_to_csv(table) if args.format == "csv" else table_to_json(table))
    return 0


def _parse_where(items) -> dict:
    where = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or key not in CSV_HEADER:
            raise SystemExit(f"--where expects column=value with a known column, got {item!r}")
        where[key] = value if key in ("method", "target", "path") else float(value)
    return where


def _cmd_fit(args) -> int:
    table = read_table(args.table)
    for col in (args.x, args.y):
        if col not in CSV_HEADER:
            raise SystemExit(f"unknown column {col!r}; choose from {', '.join(CSV_HEADER)}")
    table = table.select(**_parse_where(args.where))
    order = np.argsort(table.column(args.x), kind="stable")
    xs, ys = table.column(args.x)[order], table.column(args.y)[order]
    if args.y == "bias":
        ys = np.abs(ys)
    fit = fit_rate(xs, ys)
    doc = dataclasses.asdict(fit)
    if args.format == "json":
        text = json.dumps(doc, indent=1) + "\n"
    else:
        text = "slope,intercept,r2,points\n" + ",".join(format(v, ".17g") for v in doc.values()) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_check(args) -> int:
    report = check_bounds(read_table(args.table), args.kind)
    if args.format == "json":
        text = json.dumps([dataclasses.asdict(c) for c in report.checks], indent=1) + "\n"
    else:
        text = "\n".join(report.lines()) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="oais", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run a sweep from a JSON config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("fit", parents=[common], help="log-log rate fit between two table columns")
    p.add_argument("table")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--where", action="append", metavar="COL=VALUE", help="row filter (repeatable)")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("check", parents=[common], help="compare a table against a bound")
    p.add_argument("table")
    p.add_argument("kind", choices=BOUND_KINDS)
    p.set_defaults(func=_cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (OAISError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
