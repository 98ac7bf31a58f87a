"""Command-line entry point.

Usage: ``optomech-array <command> --config <path> [--out <path>] [--format csv|json] [--no-timestamp]``

Exit codes: 0 on success, 1 on a configuration error, 2 on a numerical failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
from pathlib import Path

from .config import Command, ConfigError, OutputFormat, parse_config
from .dynamics import TRACE_COLUMNS, NumericalError
from .oracle import ConvergenceError, NonHermitianError
from .results import ResultTable
from .studies import base_metadata, run_command

log = logging.getLogger("optomech_array")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="optomech-array", description="Polariton bands and slow-light dynamics.")
    ap.add_argument("command", choices=[c.value for c in Command])
    ap.add_argument("--config", required=True, help="run configuration file")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--format", choices=[f.value for f in OutputFormat], help="output format")
    ap.add_argument("--no-timestamp", action="store_true", help="omit the wall-clock timestamp from metadata")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def choose_format(cli_format, cfg, out_path) -> str:
    """CLI flag, then the config's [output] format, then the output suffix, then a per-command default."""
    if cli_format:
        return cli_format
    if cfg.output_format is not None:
        return cfg.output_format.value
    if out_path:
        suffix = Path(out_path).suffix.lower().lstrip(".")
        if suffix in ("csv", "json"):
            return suffix
    return "json" if cfg.command is Command.STOP_RELEASE else "csv"


def _emit(table: ResultTable, out_path, fmt: str) -> None:
    if out_path:
        table.write(out_path, fmt)
    else:
        sys.stdout.write(table.dumps(fmt))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, command=args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_path = args.out or cfg.output_path
    fmt = choose_format(args.format, cfg, out_path)
    stamp = None if args.no_timestamp else _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")

    try:
        table = run_command(cfg)
    except (NumericalError, ConvergenceError, NonHermitianError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        trace = getattr(exc, "partial_trace", None)
        if trace is not None and out_path:
            meta = base_metadata(cfg)
            meta["aborted"] = str(exc)
            if stamp:
                meta["timestamp"] = stamp
            _emit(ResultTable(list(TRACE_COLUMNS), trace.rows(), meta), out_path, fmt)
            log.warning("partial trace written to %s", out_path)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # constraint violations caught only once the model sees the values
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if stamp:
        table.metadata["timestamp"] = stamp
    _emit(table, out_path, fmt)
    log.info("%s: %d rows", cfg.command.value, len(table))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
