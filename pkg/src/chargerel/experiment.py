"""End-to-end runs of synthetic fleets checked against the per-second oracle.

Shared by the acceptance tests and the scripts in ``scripts/``.
"""
from __future__ import annotations

import json
import math
import random
import time
from datetime import datetime, timezone
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import yaml

from chargerel.adapter_export import AdapterDescriptor
from chargerel.metrics import DEFAULT_POLICY, UptimePolicy
from chargerel.model import FaultReasonDurations, MetricsRow, PeriodWindow, StateDurations
from chargerel.modelstore import ModelStore
from chargerel.pipeline import compute, durations, run_pipeline, windows_for
from chargerel.rawstore import RawStore
from chargerel.simulator import (
    Fleet,
    FleetScenario,
    generate_fleet,
    oracle_run,
    write_fleet,
)
from chargerel.statemachine import NormalizeSummary

DAY = 86400
YEAR_2024 = 1704067200  # 2024-01-01T00:00:00Z

Durations = dict[str, list[tuple[StateDurations, FaultReasonDurations]]]


def random_oracle_scenario(seed: int, max_chargers: int = 98, max_days: int = 365) -> FleetScenario:
    """A fleet of 1..max_chargers chargers over 1..max_days days, drawn from ``seed``.

    Start times are not aligned to midnight so window clipping is exercised.
    """
    rng = random.Random(f"oracle-scenario:{seed}")
    chargers = rng.randint(1, max_chargers)
    days = rng.randint(1, max_days)
    start = YEAR_2024 + rng.randrange(365 * DAY)
    return FleetScenario(
        seed=seed,
        charger_count=chargers,
        start=start,
        end=start + days * DAY,
        zombie_fraction=rng.choice([0.0, 0.05, 0.2]),
        commission_spread=rng.choice([0.0, 0.3]),
        export_utc_offset_minutes=rng.choice([0, -480, 60, 330]),
    )


@dataclass
class EndToEndRun:
    fleet: Fleet
    windows: list[PeriodWindow]
    normalize_summary: NormalizeSummary
    engine_durations: Durations
    oracle_durations: Durations
    engine_rows: list[MetricsRow]
    oracle_rows: list[MetricsRow]
    mismatches: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _rows_close(a: MetricsRow, b: MetricsRow, tol: float) -> bool:
    def close(x, y) -> bool:
        if x is None or y is None:
            return x is y
        return math.isclose(x, y, rel_tol=0.0, abs_tol=tol)

    if (a.charger, a.window) != (b.charger, b.window):
        return False
    pairs = [(a.uptime_pct, b.uptime_pct), (a.fault_time_pct, b.fault_time_pct),
             (a.unreachable_time_pct, b.unreachable_time_pct),
             (a.unavailable_time_pct, b.unavailable_time_pct),
             (a.unknown_time_pct, b.unknown_time_pct)]
    if set(a.fault_reason_pct) != set(b.fault_reason_pct):
        return False
    pairs += [(a.fault_reason_pct[k], b.fault_reason_pct[k]) for k in a.fault_reason_pct]
    return all(close(x, y) for x, y in pairs)


def compare(engine_d: Durations, oracle_d: Durations, engine_rows: list[MetricsRow],
            oracle_rows: list[MetricsRow], tol: float = 1e-9) -> list[str]:
    """Human-readable differences; durations must match exactly."""
    problems = []
    if set(engine_d) != set(oracle_d):
        problems.append(f"charger sets differ: {sorted(set(engine_d) ^ set(oracle_d))}")
    for cid in sorted(set(engine_d) & set(oracle_d)):
        for (ed, er), (od, orr) in zip(engine_d[cid], oracle_d[cid]):
            if ed.seconds_by_state != od.seconds_by_state:
                problems.append(f"{cid} {ed.window.label}: state seconds "
                                f"{dict(ed.seconds_by_state)} != {dict(od.seconds_by_state)}")
            if dict(er.seconds_by_reason) != dict(orr.seconds_by_reason):
                problems.append(f"{cid} {ed.window.label}: reason seconds "
                                f"{dict(er.seconds_by_reason)} != {dict(orr.seconds_by_reason)}")
    key = lambda r: (r.charger, r.window.start)  # noqa: E731
    e_rows, o_rows = sorted(engine_rows, key=key), sorted(oracle_rows, key=key)
    if len(e_rows) != len(o_rows):
        problems.append(f"row counts differ: {len(e_rows)} != {len(o_rows)}")
    for a, b in zip(e_rows, o_rows):
        if not _rows_close(a, b, tol):
            problems.append(f"{a.charger} {a.window.label}: {a} != {b}")
    return problems


def run_end_to_end(
    scenario: FleetScenario,
    workdir: Union[str, Path],
    granularity: str = "monthly",
    timezone: str = "UTC",
    policy: UptimePolicy = DEFAULT_POLICY,
) -> EndToEndRun:
    """Simulate, export, ingest, normalize and compute; then tally the truth per second."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    fleet = generate_fleet(scenario)
    paths = write_fleet(fleet, workdir)
    windows = windows_for(granularity, scenario.start, scenario.end, timezone)
    with RawStore(workdir / "raw.sqlite") as raw, ModelStore(workdir / "model.sqlite") as model:
        _, summary = run_pipeline(raw, model, AdapterDescriptor(),
                                  [paths["overview"], paths["events"], paths["sessions"]],
                                  fleet.snapshot_at)
        engine_d = durations(model, windows)
        engine_rows = compute(model, windows, policy)
    oracle_d, oracle_rows = oracle_run(fleet.truth, windows, policy)
    run = EndToEndRun(fleet, windows, summary, engine_d, oracle_d, engine_rows, oracle_rows)
    run.mismatches = compare(engine_d, oracle_d, engine_rows, oracle_rows)
    return run


# (granularity, --start, --end) for the site case-study reports
CASE_STUDY_RANGES = (
    ("yearly", "2018-01-01", "2025-01-01"),
    ("monthly", "2024-01-01", "2025-01-01"),
    ("daily", "2024-01-01", "2025-01-01"),
)
CASE_STUDY_VIEWS = (("site", "json"), ("site", "csv"), ("chargers", "csv"),
                    ("stacked_states", "csv"), ("reason_allocation", "csv"))


@dataclass
class CaseStudyRun:
    workdir: Path
    reports: dict[str, Path]
    seconds: float
    exit_codes: list[int]


def run_case_study(scenario_path: Union[str, Path], workdir: Union[str, Path],
                   site_timezone: str = "America/Los_Angeles",
                   ranges=CASE_STUDY_RANGES, views=CASE_STUDY_VIEWS) -> CaseStudyRun:
    """Drive the CLI through simulate, ingest, normalize, compute and report.

    The extraction instant is pinned to the simulated snapshot so the output
    depends only on the scenario.
    """
    from chargerel.cli import main  # the CLI imports this module's siblings

    workdir = Path(workdir).resolve()
    workdir.mkdir(parents=True, exist_ok=True)
    export = workdir / "export"
    cfg = workdir / "chargerel.yaml"
    cfg.write_text(yaml.safe_dump({
        "store_path": "store/raw.sqlite",
        "model_path": "store/model.sqlite",
        "site_timezone": site_timezone,
        "sources": [{"name": "export", "inputs": [str(export / f) for f in
                                                 ("overview.csv", "events.csv", "sessions.csv")]}],
        "report": {"out_dir": "reports"},
    }))
    base = ["--config", str(cfg)]
    codes = []
    t0 = time.perf_counter()
    codes.append(main(["simulate", str(scenario_path), "--out", str(export)]))
    snapshot = json.loads((export / "truth.json").read_text())["snapshot_at"]
    stamp = datetime.fromtimestamp(snapshot, timezone.utc).isoformat()
    codes.append(main(base + ["ingest", "--extracted-at", stamp]))
    codes.append(main(base + ["normalize"]))
    reports = {}
    for gran, start, end in ranges:
        codes.append(main(base + ["compute", "--granularity", gran, "--start", start, "--end", end]))
        for view, fmt in views:
            codes.append(main(base + ["report", "--granularity", gran, "--view", view,
                                      "--format", fmt]))
            name = f"{gran}_{view}.{fmt}"
            reports[name] = workdir / "reports" / name
    return CaseStudyRun(workdir, reports, time.perf_counter() - t0, codes)
