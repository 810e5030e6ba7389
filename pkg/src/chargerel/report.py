"""Site-wide aggregation and report export."""
from __future__ import annotations

import csv
import io
import json
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from chargerel.model import ChargerStatus, MetricsRow, PeriodWindow
from chargerel.modelstore import ChargerHistory, metrics_row_to_dict

ActivityFn = Callable[[str, PeriodWindow], bool]

PERCENT_FIELDS = (
    "uptime_pct",
    "fault_time_pct",
    "unreachable_time_pct",
    "unavailable_time_pct",
    "unknown_time_pct",
)
STACKED_SERIES = ("uptime", "fault_time", "unreachable_time", "unavailable_time", "unknown_time")

AGGREGATION = {
    "state_percent_mean": "unweighted mean over active chargers",
    "reason_allocation": "duration-weighted over active chargers",
}

DEFAULT_DECOMMISSION_DAYS = 90


class ReportError(ValueError):
    pass


class View(str, enum.Enum):
    STACKED_STATES = "stacked_states"
    REASON_ALLOCATION = "reason_allocation"


@dataclass(frozen=True)
class SiteReport:
    """Site averages for one window. All means are ``None`` when no charger is active."""

    window: PeriodWindow
    chargers_active: int
    mean_uptime_pct: Optional[float]
    mean_fault_time_pct: Optional[float]
    mean_unreachable_time_pct: Optional[float]
    mean_unavailable_time_pct: Optional[float]
    mean_unknown_time_pct: Optional[float]
    reason_allocation_pct: Mapping[str, float] = field(default_factory=dict)
    policy: Mapping = field(default_factory=dict)

    @property
    def defined(self) -> bool:
        return self.chargers_active > 0

    def to_dict(self) -> dict:
        return {
            "window_label": self.window.label,
            "window_start": self.window.start,
            "window_end": self.window.end,
            "chargers_active": self.chargers_active,
            "mean_uptime_pct": self.mean_uptime_pct,
            "mean_fault_time_pct": self.mean_fault_time_pct,
            "mean_unreachable_time_pct": self.mean_unreachable_time_pct,
            "mean_unavailable_time_pct": self.mean_unavailable_time_pct,
            "mean_unknown_time_pct": self.mean_unknown_time_pct,
            "reason_allocation_pct": dict(sorted(self.reason_allocation_pct.items())),
            "policy": dict(self.policy),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SiteReport":
        return cls(
            window=PeriodWindow(d["window_start"], d["window_end"], d["window_label"]),
            chargers_active=d["chargers_active"],
            mean_uptime_pct=d["mean_uptime_pct"],
            mean_fault_time_pct=d["mean_fault_time_pct"],
            mean_unreachable_time_pct=d["mean_unreachable_time_pct"],
            mean_unavailable_time_pct=d["mean_unavailable_time_pct"],
            mean_unknown_time_pct=d["mean_unknown_time_pct"],
            reason_allocation_pct=d["reason_allocation_pct"],
            policy=d.get("policy", {}),
        )


class ActivityRule:
    """Decides which chargers count toward a window's site averages.

    A charger is active in a window once it has any non-UNKNOWN status at or
    before the window's end, until it is decommissioned: missing from every
    overview snapshot for ``decommission_days`` after it was last seen.
    """

    def __init__(self, first_known: Mapping[str, int],
                 decommissioned: Optional[Mapping[str, int]] = None):
        self.first_known = dict(first_known)
        self.decommissioned = dict(decommissioned or {})

    def __call__(self, charger: str, window: PeriodWindow) -> bool:
        first = self.first_known.get(charger)
        if first is None or first >= window.end:
            return False
        gone = self.decommissioned.get(charger)
        return gone is None or window.start < gone

    @classmethod
    def from_model(
        cls,
        histories: Mapping[str, ChargerHistory],
        snapshots: Sequence[int] = (),
        presence: Optional[Mapping[str, Sequence[int]]] = None,
        decommission_days: int = DEFAULT_DECOMMISSION_DAYS,
    ) -> "ActivityRule":
        presence = presence or {}
        horizon = decommission_days * 86400
        first_known: dict[str, int] = {}
        decommissioned: dict[str, int] = {}
        for cid, hist in histories.items():
            known = [s.at for s in hist.samples if s.status is not ChargerStatus.UNKNOWN]
            if known:
                first_known[cid] = min(known)
            seen = list(presence.get(cid, ()))
            if hist.samples:
                seen.append(max(s.at for s in hist.samples))
            if not seen or not snapshots:
                continue
            cutoff = max(seen) + horizon
            # Only decommission on evidence: a later snapshot that omits it.
            if any(s >= cutoff for s in snapshots):
                decommissioned[cid] = cutoff
        return cls(first_known, decommissioned)


def _default_activity(row: MetricsRow) -> bool:
    return row.unknown_time_pct < 100.0


def _mean(values: list[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def site_average(
    rows: Sequence[MetricsRow],
    activity: Optional[ActivityFn] = None,
    policy: Optional[Mapping] = None,
    window: Optional[PeriodWindow] = None,
) -> SiteReport:
    """Average one window's per-charger rows over the active chargers.

    State percents are plain means (each charger counts once); the reason
    allocation weights each charger by its faulted time. Without an
    ``activity`` rule a charger is active unless its row is all UNKNOWN.
    """
    windows = {r.window for r in rows}
    if len(windows) > 1:
        raise ReportError("rows span more than one window")
    if window is None:
        if not windows:
            raise ReportError("no rows and no window given")
        window = windows.pop()
    active = [
        r for r in rows
        if (activity(r.charger, r.window) if activity else _default_activity(r))
    ]
    uptimes = [r.uptime_pct for r in active if r.uptime_pct is not None]
    faulted_total = sum(r.fault_time_pct for r in active)
    allocation: dict[str, float] = {}
    if faulted_total > 0:
        for r in active:
            for reason, pct in r.fault_reason_pct.items():
                allocation[reason] = allocation.get(reason, 0.0) + r.fault_time_pct * pct
        allocation = {k: v / faulted_total for k, v in sorted(allocation.items())}
    n = len(active)
    return SiteReport(
        window=window,
        chargers_active=n,
        mean_uptime_pct=_mean(uptimes) if n else None,
        mean_fault_time_pct=_mean([r.fault_time_pct for r in active]),
        mean_unreachable_time_pct=_mean([r.unreachable_time_pct for r in active]),
        mean_unavailable_time_pct=_mean([r.unavailable_time_pct for r in active]),
        mean_unknown_time_pct=_mean([r.unknown_time_pct for r in active]),
        reason_allocation_pct=allocation,
        policy=dict(policy or {}),
    )


def site_reports(rows: Iterable[MetricsRow], activity: Optional[ActivityFn] = None,
                 policy: Optional[Mapping] = None) -> list[SiteReport]:
    """Group rows by window and average each group, in window order."""
    groups: dict[PeriodWindow, list[MetricsRow]] = {}
    for r in rows:
        groups.setdefault(r.window, []).append(r)
    return [site_average(groups[w], activity, policy, w) for w in sorted(groups)]


# -- export ---------------------------------------------------------------------

def _fmt1(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.1f}"


def _reason_names(maps: Iterable[Mapping[str, float]]) -> list[str]:
    return sorted({k for m in maps for k in m})


def site_reports_csv(reports: Sequence[SiteReport]) -> str:
    reasons = _reason_names(r.reason_allocation_pct for r in reports)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["window_label", "chargers_active", *PERCENT_FIELDS,
                *(f"reason:{name}" for name in reasons)])
    for r in reports:
        w.writerow([
            r.window.label, r.chargers_active,
            _fmt1(r.mean_uptime_pct), _fmt1(r.mean_fault_time_pct),
            _fmt1(r.mean_unreachable_time_pct), _fmt1(r.mean_unavailable_time_pct),
            _fmt1(r.mean_unknown_time_pct),
            *(_fmt1(r.reason_allocation_pct.get(name)) for name in reasons),
        ])
    return buf.getvalue()


def site_reports_json(reports: Sequence[SiteReport]) -> str:
    policy = reports[0].policy if reports else {}
    doc = {
        "metadata": {"aggregation": AGGREGATION, "policy": dict(policy)},
        "reports": [r.to_dict() for r in reports],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def charger_rows_csv(rows: Sequence[MetricsRow]) -> str:
    reasons = _reason_names(r.fault_reason_pct for r in rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["charger", "window_label", *PERCENT_FIELDS,
                *(f"reason:{name}" for name in reasons)])
    for r in sorted(rows, key=lambda r: (r.window.start, r.charger)):
        w.writerow([
            r.charger, r.window.label, _fmt1(r.uptime_pct), _fmt1(r.fault_time_pct),
            _fmt1(r.unreachable_time_pct), _fmt1(r.unavailable_time_pct),
            _fmt1(r.unknown_time_pct),
            *(_fmt1(r.fault_reason_pct.get(name)) for name in reasons),
        ])
    return buf.getvalue()


def charger_rows_json(rows: Sequence[MetricsRow]) -> str:
    ordered = sorted(rows, key=lambda r: (r.window.start, r.charger))
    return json.dumps({"rows": [metrics_row_to_dict(r) for r in ordered]},
                      indent=2, sort_keys=True) + "\n"


def export_report(reports: Sequence[Union[SiteReport, MetricsRow]], fmt: str,
                  destination: Union[str, Path]) -> Path:
    """Write site reports (or per-charger rows) as CSV or JSON.

    Output bytes depend only on the input values.
    """
    if not reports:
        raise ReportError("nothing to export")
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise ReportError(f"unsupported format {fmt!r}")
    if isinstance(reports[0], SiteReport):
        text = site_reports_csv(reports) if fmt == "csv" else site_reports_json(reports)
    else:
        text = charger_rows_csv(reports) if fmt == "csv" else charger_rows_json(reports)
    path = Path(destination)
    path.write_text(text, encoding="utf-8", newline="")
    return path


def load_site_reports_json(path: Union[str, Path]) -> list[SiteReport]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [SiteReport.from_dict(d) for d in doc["reports"]]


def plot_data(reports: Sequence[SiteReport], view: Union[View, str]) -> list[tuple[str, str, float]]:
    """Long-format ``(window_label, series, value)`` rows for charting."""
    view = View(view)
    out: list[tuple[str, str, float]] = []
    for r in sorted(reports, key=lambda r: r.window):
        if not r.defined:
            continue
        if view is View.STACKED_STATES:
            values = (r.mean_uptime_pct, r.mean_fault_time_pct, r.mean_unreachable_time_pct,
                      r.mean_unavailable_time_pct, r.mean_unknown_time_pct)
            for name, value in zip(STACKED_SERIES, values):
                if value is not None:
                    out.append((r.window.label, name, value))
        else:
            for reason, value in sorted(r.reason_allocation_pct.items()):
                out.append((r.window.label, reason, value))
    return out


def plot_data_csv(rows: Sequence[tuple[str, str, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["window_label", "series", "value"])
    for label, series, value in rows:
        w.writerow([label, series, f"{value:.6f}"])
    return buf.getvalue()
