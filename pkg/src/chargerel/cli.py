"""Command-line entry point.

Every command is single-shot; schedule repeated extraction with cron or a
similar tool. Commands that touch the stores hold an exclusive file lock for
their whole run, so a concurrent invocation fails fast instead of waiting.
"""
from __future__ import annotations

import argparse
import json
import logging
import sqlite3
import sys
from contextlib import contextmanager
from datetime import date, datetime
from pathlib import Path
from typing import Iterator, Optional, Sequence

from filelock import FileLock, Timeout

from chargerel import __version__
from chargerel.adapter_export import ExportFormatError, parse_timestamp, validate_export
from chargerel.config import Config, load_config
from chargerel.modelstore import ModelStore
from chargerel.pipeline import build_site_reports, compute, ingest, windows_for
from chargerel.rawstore import RawStore, StoreError
from chargerel.report import (
    ReportError,
    charger_rows_csv,
    charger_rows_json,
    plot_data,
    plot_data_csv,
    site_reports_csv,
    site_reports_json,
)
from chargerel.simulator import ScenarioError, generate_fleet, load_scenario, write_fleet
from chargerel.statemachine import normalize
from chargerel.timeline import ConfigurationError, Granularity, get_zone, local_midnight

logger = logging.getLogger("chargerel")

EXIT_OK = 0
EXIT_USAGE = 2  # argparse's own code
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_PARTIAL = 5
EXIT_LOCKED = 6

VIEWS = ("site", "chargers", "stacked_states", "reason_allocation")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@contextmanager
def _locked(cfg: Config) -> Iterator[None]:
    cfg.store_path.parent.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(cfg.store_path) + ".lock", timeout=0)
    try:
        lock.acquire()
    except Timeout:
        raise CliError(f"store {cfg.store_path} is in use by another invocation", EXIT_LOCKED)
    try:
        yield
    finally:
        lock.release()


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def _write(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8", newline="")
    logger.info("wrote %s", out)


def _local_date(text: str, tz: str) -> int:
    """Midnight of a YYYY-MM-DD date in the site timezone, or an explicit ISO instant."""
    try:
        return local_midnight(date.fromisoformat(text), get_zone(tz))
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise CliError(f"cannot parse date {text!r}", EXIT_USAGE) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=get_zone(tz))
    return int(dt.timestamp())


# -- commands ---------------------------------------------------------------------

def cmd_validate(args: argparse.Namespace, cfg: Optional[Config]) -> int:
    code = EXIT_OK
    for path in args.paths:
        report = validate_export(path)
        _emit({
            "path": report.path, "kind": report.kind, "rows": report.row_count,
            "missing_columns": report.missing_columns,
            "violations": [[v.line, v.message] for v in report.violations],
        })
        if not report.ok:
            code = EXIT_PARTIAL
    return code


def cmd_ingest(args: argparse.Namespace, cfg: Config) -> int:
    source = cfg.source(args.source)
    paths = [Path(p) for p in args.paths] or source.inputs
    if not paths:
        raise CliError("no input files given on the command line or in the config", EXIT_USAGE)
    for p in paths:
        if not p.is_file():
            raise CliError(f"input file not found: {p}", EXIT_IO)
    extracted_at = parse_timestamp(args.extracted_at) if args.extracted_at else None
    with _locked(cfg), RawStore(cfg.store_path) as raw:
        summary = ingest(raw, source.descriptor(), paths, extracted_at)
    _emit({
        "command": "ingest", "source": source.name, "rows_read": summary.rows_read,
        "items_stored": summary.items_stored, "rows_rejected": summary.rows_rejected,
    })
    return EXIT_PARTIAL if summary.rows_rejected else EXIT_OK


def cmd_normalize(args: argparse.Namespace, cfg: Config) -> int:
    with _locked(cfg), RawStore(cfg.store_path) as raw, ModelStore(cfg.model_path) as model:
        summary = normalize(raw, model, cfg.event_rules, batch_size=args.batch_size)
    _emit({
        "command": "normalize", "processed": summary.processed,
        "quarantined": summary.quarantined, "duplicates": summary.duplicates,
    })
    return EXIT_PARTIAL if summary.quarantined else EXIT_OK


def cmd_compute(args: argparse.Namespace, cfg: Config) -> int:
    start = _local_date(args.start, cfg.site_timezone)
    end = _local_date(args.end, cfg.site_timezone)
    if start >= end:
        raise CliError("--start must precede --end", EXIT_USAGE)
    windows = windows_for(args.granularity, start, end, cfg.site_timezone)
    with _locked(cfg), ModelStore(cfg.model_path) as model:
        rows = compute(model, windows, cfg.policy)
        model.save_metrics(args.granularity, rows)
        chargers = len(model.charger_ids())
    _emit({
        "command": "compute", "granularity": args.granularity, "windows": len(windows),
        "chargers": chargers, "rows": len(rows),
    })
    return EXIT_OK


def render_report(model: ModelStore, cfg: Config, granularity: str, view: str, fmt: str) -> str:
    rows = model.load_metrics(granularity)
    if not rows:
        raise CliError(f"no computed {granularity} metrics; run compute first", EXIT_IO)
    if view == "chargers":
        return charger_rows_csv(rows) if fmt == "csv" else charger_rows_json(rows)
    reports = build_site_reports(model, rows, cfg.policy, cfg.decommission_days)
    if view == "site":
        return site_reports_csv(reports) if fmt == "csv" else site_reports_json(reports)
    series = plot_data(reports, view)
    if fmt == "csv":
        return plot_data_csv(series)
    doc = {"view": view, "granularity": granularity,
           "series": [{"window_label": w, "series": s, "value": v} for w, s, v in series]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_report(args: argparse.Namespace, cfg: Config) -> int:
    out = Path(args.out) if args.out and args.out != "-" else None
    if args.out is None and cfg.report_dir is not None:
        out = cfg.report_dir / f"{args.granularity}_{args.view}.{args.format}"
    with _locked(cfg), ModelStore(cfg.model_path) as model:
        text = render_report(model, cfg, args.granularity, args.view, args.format)
    _write(text, out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, cfg: Optional[Config]) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    fleet = generate_fleet(scenario)
    paths = write_fleet(fleet, args.out)
    _emit({
        "command": "simulate", "seed": scenario.seed, "chargers": scenario.charger_count,
        "files": {k: str(p) for k, p in sorted(paths.items())},
        "snapshot_at": fleet.snapshot_at,
    })
    return EXIT_OK


def cmd_reset(args: argparse.Namespace, cfg: Config) -> int:
    with _locked(cfg), RawStore(cfg.store_path) as raw:
        requeued = raw.reset_processed()
        if not args.keep_model:
            with ModelStore(cfg.model_path) as model:
                model.clear()
    _emit({"command": "reset-processed", "requeued": requeued,
           "model_cleared": not args.keep_model})
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chargerel", description="EV charger reliability analytics.")
    p.add_argument("--config", default="chargerel.yaml", help="YAML config (default: %(default)s)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check export files against their schemas")
    s.add_argument("paths", nargs="+")
    s.set_defaults(func=cmd_validate, needs_config=False)

    s = sub.add_parser("ingest", help="extract export files into the raw store")
    s.add_argument("paths", nargs="*", help="defaults to the source's configured inputs")
    s.add_argument("--source", help="source name from the config (default: first)")
    s.add_argument("--extracted-at", help="ISO-8601 extraction instant (default: now)")
    s.set_defaults(func=cmd_ingest, needs_config=True)

    s = sub.add_parser("normalize", help="apply queued raw items to the model")
    s.add_argument("--batch-size", type=int, default=5000)
    s.set_defaults(func=cmd_normalize, needs_config=True)

    grans = [g.value for g in Granularity]
    s = sub.add_parser("compute", help="compute per-charger metrics for a range")
    s.add_argument("--granularity", choices=grans, required=True)
    s.add_argument("--start", required=True, help="YYYY-MM-DD (site timezone) or ISO instant")
    s.add_argument("--end", required=True, help="exclusive; same format as --start")
    s.set_defaults(func=cmd_compute, needs_config=True)

    s = sub.add_parser("report", help="export site or charger reports")
    s.add_argument("--granularity", choices=grans, required=True)
    s.add_argument("--view", choices=VIEWS, default="site")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--out", help="output file, or - for stdout (default: report dir from config, else stdout)")
    s.set_defaults(func=cmd_report, needs_config=True)

    s = sub.add_parser("simulate", help="generate a synthetic fleet's export files")
    s.add_argument("scenario", help="scenario YAML")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate, needs_config=False)

    s = sub.add_parser("reset-processed", help="re-queue all raw items for a rebuild")
    s.add_argument("--keep-model", action="store_true",
                   help="keep the normalized model; only items never applied take effect")
    s.set_defaults(func=cmd_reset, needs_config=True)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config) if args.needs_config else None
        return args.func(args, cfg)
    except CliError as exc:
        logger.error("%s", exc)
        return exc.code
    except (ConfigurationError, ScenarioError) as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (OSError, StoreError, ExportFormatError, ReportError, sqlite3.Error) as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
