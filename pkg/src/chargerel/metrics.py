"""Uptime, Fault Time, Fault-Reason Time, Unreachable Time and NEVI uptime.

Percentages are computed as ``seconds * 100 / denominator`` so that
integer-valued results come out exact in floating point.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

from chargerel.model import (
    DOWN_STATUSES,
    ChargerStatus,
    FaultReasonDurations,
    FaultRecord,
    MetricsRow,
    PeriodWindow,
    StateDurations,
)
from chargerel.timeline import (
    FaultIndex,
    Timeline,
    faulted_reason_durations,
    state_durations,
)

MINUTES_PER_YEAR = 525_600

S = ChargerStatus


class UnknownPolicy(str, enum.Enum):
    NOT_UP = "not_up"
    EXCLUDE_FROM_DENOMINATOR = "exclude_from_denominator"
    COUNT_AS_UP = "count_as_up"


@dataclass(frozen=True)
class UptimePolicy:
    unknown_policy: UnknownPolicy = UnknownPolicy.NOT_UP
    # charger -> sorted, non-overlapping [start, end) spans whose downtime is excused
    excluded_intervals: Mapping[str, tuple[tuple[int, int], ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean = {}
        for charger, spans in self.excluded_intervals.items():
            spans = tuple(sorted((int(a), int(b)) for a, b in spans))
            for a, b in spans:
                if a >= b:
                    raise ValueError(f"empty excluded interval [{a}, {b}) for {charger}")
            for (_, b1), (a2, _) in zip(spans, spans[1:]):
                if a2 < b1:
                    raise ValueError(f"overlapping excluded intervals for {charger}")
            clean[charger] = spans
        object.__setattr__(self, "excluded_intervals", clean)
        object.__setattr__(self, "unknown_policy", UnknownPolicy(self.unknown_policy))

    def to_dict(self) -> dict:
        return {
            "unknown_policy": self.unknown_policy.value,
            "excluded_intervals": {
                c: [list(span) for span in spans]
                for c, spans in sorted(self.excluded_intervals.items())
            },
        }


DEFAULT_POLICY = UptimePolicy()


class MetricInputError(ValueError):
    pass


def _pct(part: int, whole: int) -> float:
    return part * 100 / whole


def uptime(d: StateDurations, policy: UptimePolicy = DEFAULT_POLICY,
           excused_seconds: int = 0) -> Optional[float]:
    """Share of the window spent OCCUPIED or AVAILABLE.

    ``excused_seconds`` is downtime inside the policy's excluded intervals and
    counts as up. Returns ``None`` when the denominator is empty.
    """
    up = d[S.OCCUPIED] + d[S.AVAILABLE] + excused_seconds
    total = d.window.duration_seconds
    unknown = d[S.UNKNOWN]
    if policy.unknown_policy is UnknownPolicy.EXCLUDE_FROM_DENOMINATOR:
        total -= unknown
    elif policy.unknown_policy is UnknownPolicy.COUNT_AS_UP:
        up += unknown
    if total == 0:
        return None
    return _pct(up, total)


def fault_time(d: StateDurations) -> float:
    return _pct(d[S.FAULTED], d.window.duration_seconds)


def unreachable_time(d: StateDurations) -> float:
    return _pct(d[S.UNREACHABLE], d.window.duration_seconds)


def unavailable_time(d: StateDurations) -> float:
    return _pct(d[S.UNAVAILABLE], d.window.duration_seconds)


def unknown_time(d: StateDurations) -> float:
    return _pct(d[S.UNKNOWN], d.window.duration_seconds)


def fault_reason_time(r: FaultReasonDurations) -> dict[str, float]:
    total = r.faulted_seconds
    if total == 0:
        return {}
    return {reason: _pct(secs, total) for reason, secs in sorted(r.seconds_by_reason.items())}


@dataclass(frozen=True)
class NeviInputs:
    outage_minutes: float
    excluded_minutes: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.excluded_minutes <= self.outage_minutes <= MINUTES_PER_YEAR:
            raise MetricInputError(
                "need 0 <= excluded_minutes <= outage_minutes <= 525600, got "
                f"outage={self.outage_minutes}, excluded={self.excluded_minutes}"
            )


def nevi_uptime(n: NeviInputs) -> float:
    net = n.outage_minutes - n.excluded_minutes
    return (MINUTES_PER_YEAR - net) * 100 / MINUTES_PER_YEAR


def excused_downtime(timeline: Timeline, spans: Sequence[tuple[int, int]],
                     window: PeriodWindow) -> int:
    """Seconds of FAULTED/UNREACHABLE/UNAVAILABLE inside both window and spans."""
    total = 0
    for a, b in spans:
        lo, hi = max(a, window.start), min(b, window.end)
        if lo >= hi:
            continue
        for iv in timeline.intervals:
            if iv.end <= lo:
                continue
            if iv.start >= hi:
                break
            if iv.status in DOWN_STATUSES:
                total += min(iv.end, hi) - max(iv.start, lo)
    return total


def metrics_row(d: StateDurations, r: FaultReasonDurations,
                policy: UptimePolicy = DEFAULT_POLICY, excused_seconds: int = 0) -> MetricsRow:
    return MetricsRow(
        charger=d.charger,
        window=d.window,
        uptime_pct=uptime(d, policy, excused_seconds),
        fault_time_pct=fault_time(d),
        unreachable_time_pct=unreachable_time(d),
        unavailable_time_pct=unavailable_time(d),
        unknown_time_pct=unknown_time(d),
        fault_reason_pct=fault_reason_time(r),
    )


def compute_metrics(
    timeline: Timeline,
    faults: Union[Sequence[FaultRecord], FaultIndex],
    windows: Iterable[PeriodWindow],
    policy: UptimePolicy = DEFAULT_POLICY,
) -> list[MetricsRow]:
    index = faults if isinstance(faults, FaultIndex) else FaultIndex(faults)
    spans = policy.excluded_intervals.get(timeline.charger, ())
    rows = []
    for w in windows:
        d = state_durations(timeline, w)
        r = faulted_reason_durations(timeline, index, w)
        excused = excused_downtime(timeline, spans, w) if spans else 0
        rows.append(metrics_row(d, r, policy, excused))
    return rows
