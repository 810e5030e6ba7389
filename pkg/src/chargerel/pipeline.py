"""Library-level orchestration: ingest, normalize, compute, report."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from chargerel.adapter_export import AdapterDescriptor, Extraction, Violation, extract
from chargerel.metrics import DEFAULT_POLICY, UptimePolicy, compute_metrics
from chargerel.model import FaultReasonDurations, MetricsRow, PeriodWindow, StateDurations
from chargerel.modelstore import ModelStore
from chargerel.rawstore import RawStore
from chargerel.report import DEFAULT_DECOMMISSION_DAYS, ActivityRule, SiteReport, site_reports
from chargerel.statemachine import DEFAULT_RULES, ClassificationRules, NormalizeSummary, normalize
from chargerel.timeline import (
    FaultIndex,
    Granularity,
    PeriodSpec,
    build_timeline,
    faulted_reason_durations,
    slice_periods,
    state_durations,
)

logger = logging.getLogger(__name__)

__all__ = [
    "IngestSummary", "ingest", "normalize", "compute", "durations", "windows_for", "activity_rule",
    "build_site_reports", "run_pipeline",
]


@dataclass
class IngestSummary:
    items_stored: int = 0
    rows_read: int = 0
    rejected: list[tuple[str, Violation]] = field(default_factory=list)

    @property
    def rows_rejected(self) -> int:
        return len(self.rejected)


def ingest(raw: RawStore, descriptor: AdapterDescriptor, paths: Sequence[Union[str, Path]],
           extracted_at: Optional[int] = None) -> IngestSummary:
    """Extract every file, then store all items in one transaction."""
    extraction: Extraction = extract(descriptor, paths, extracted_at)
    ids = raw.store_many(extraction.items)
    return IngestSummary(len(ids), extraction.rows_read, extraction.rejected)


def windows_for(granularity: Union[Granularity, str], start: int, end: int,
                tz: str = "UTC") -> list[PeriodWindow]:
    return slice_periods(PeriodSpec(Granularity(granularity), start, end, tz))


def compute(model: ModelStore, windows: Sequence[PeriodWindow],
            policy: UptimePolicy = DEFAULT_POLICY) -> list[MetricsRow]:
    """Metric rows for every known charger over every window."""
    if not windows:
        return []
    t0 = min(w.start for w in windows)
    t1 = max(w.end for w in windows)
    rows: list[MetricsRow] = []
    histories = model.histories()
    if not histories:
        logger.warning("normalized model is empty; no metrics computed")
    for cid, hist in sorted(histories.items()):
        tl = build_timeline(cid, hist.samples, t0, t1)
        rows.extend(compute_metrics(tl, FaultIndex(hist.faults), windows, policy))
    return rows


def durations(
    model: ModelStore, windows: Sequence[PeriodWindow]
) -> dict[str, list[tuple[StateDurations, FaultReasonDurations]]]:
    """Raw per-window state and fault-reason seconds for every known charger."""
    if not windows:
        return {cid: [] for cid in model.charger_ids()}
    t0 = min(w.start for w in windows)
    t1 = max(w.end for w in windows)
    out = {}
    for cid, hist in sorted(model.histories().items()):
        tl = build_timeline(cid, hist.samples, t0, t1)
        index = FaultIndex(hist.faults)
        out[cid] = [(state_durations(tl, w), faulted_reason_durations(tl, index, w))
                    for w in windows]
    return out


def activity_rule(model: ModelStore,
                  decommission_days: int = DEFAULT_DECOMMISSION_DAYS) -> ActivityRule:
    snapshots, presence = model.overview_presence()
    return ActivityRule.from_model(model.histories(), snapshots, presence, decommission_days)


def build_site_reports(model: ModelStore, rows: Sequence[MetricsRow],
                       policy: UptimePolicy = DEFAULT_POLICY,
                       decommission_days: int = DEFAULT_DECOMMISSION_DAYS) -> list[SiteReport]:
    return site_reports(rows, activity_rule(model, decommission_days), policy.to_dict())


def run_pipeline(raw: RawStore, model: ModelStore, descriptor: AdapterDescriptor,
                 paths: Sequence[Union[str, Path]], extracted_at: int,
                 rules: ClassificationRules = DEFAULT_RULES) -> tuple[IngestSummary, NormalizeSummary]:
    summary = ingest(raw, descriptor, paths, extracted_at)
    return summary, normalize(raw, model, rules)
