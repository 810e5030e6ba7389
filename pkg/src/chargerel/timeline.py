"""Status timelines and per-window duration accounting.

Point samples become a step function: each status holds from its sample time
until the next sample, and time before the first sample is UNKNOWN. All
arithmetic is in integer seconds.
"""
from __future__ import annotations

import enum
from bisect import bisect_right
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, NamedTuple, Sequence, Union
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from chargerel.model import (
    UNKNOWN_FAULT,
    ChargerStatus,
    FaultReasonDurations,
    FaultRecord,
    PeriodWindow,
    StateDurations,
    StatusSample,
    STATUSES,
)


class TimelineError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


class StateInterval(NamedTuple):
    start: int
    end: int
    status: ChargerStatus


@dataclass(frozen=True)
class Timeline:
    charger: str
    intervals: tuple[StateInterval, ...]

    def __post_init__(self) -> None:
        if not self.intervals:
            raise TimelineError("timeline needs at least one interval")
        object.__setattr__(self, "_starts", [iv.start for iv in self.intervals])
        object.__setattr__(self, "_ends", [iv.end for iv in self.intervals])

    @property
    def start(self) -> int:
        return self.intervals[0].start

    @property
    def end(self) -> int:
        return self.intervals[-1].end

    def status_at(self, t: int) -> ChargerStatus:
        if not self.start <= t < self.end:
            raise TimelineError(f"{t} outside timeline [{self.start}, {self.end})")
        idx = bisect_right(self._starts, t) - 1
        return self.intervals[idx].status

    def change_points(self) -> list[StatusSample]:
        """One sample per interval start; rebuilding from these is lossless."""
        return [StatusSample(self.charger, iv.start, iv.status) for iv in self.intervals]


def build_timeline(charger: str, samples: Iterable[StatusSample], t0: int, t1: int) -> Timeline:
    """Step-function timeline over ``[t0, t1)`` from one charger's samples.

    Samples at or before ``t0`` seed the status at ``t0``. Of several samples
    with the same timestamp the last one supplied wins.
    """
    if t0 >= t1:
        raise TimelineError(f"empty horizon [{t0}, {t1})")
    ordered = sorted(samples, key=lambda s: s.at)
    status = ChargerStatus.UNKNOWN
    raw: list[list] = []  # [start, status]
    for s in ordered:
        if s.charger != charger:
            raise TimelineError(f"sample for {s.charger!r} given to timeline of {charger!r}")
        if s.at <= t0:
            status = s.status
        elif s.at < t1:
            if not raw:
                raw.append([t0, status])
            if raw[-1][0] == s.at:
                raw[-1][1] = s.status
            else:
                raw.append([s.at, s.status])
    if not raw:
        raw.append([t0, status])

    intervals: list[StateInterval] = []
    for i, (start, st) in enumerate(raw):
        end = raw[i + 1][0] if i + 1 < len(raw) else t1
        if intervals and intervals[-1].status is st:
            intervals[-1] = StateInterval(intervals[-1].start, end, st)
        else:
            intervals.append(StateInterval(start, end, st))
    return Timeline(charger, tuple(intervals))


def _first_overlap(timeline: Timeline, window: PeriodWindow) -> int:
    if window.start < timeline.start or window.end > timeline.end:
        raise TimelineError(
            f"window [{window.start}, {window.end}) outside timeline "
            f"[{timeline.start}, {timeline.end})"
        )
    return bisect_right(timeline._ends, window.start)


def state_durations(timeline: Timeline, window: PeriodWindow) -> StateDurations:
    seconds = dict.fromkeys(STATUSES, 0)
    intervals = timeline.intervals
    i = _first_overlap(timeline, window)
    while i < len(intervals) and intervals[i].start < window.end:
        iv = intervals[i]
        seconds[iv.status] += min(iv.end, window.end) - max(iv.start, window.start)
        i += 1
    return StateDurations(timeline.charger, window, seconds)


class FaultIndex:
    """Fault reports sorted by time, for repeated per-window attribution."""

    def __init__(self, faults: Iterable[FaultRecord]):
        records = sorted(faults, key=lambda f: f.at)
        self.times = [f.at for f in records]
        self.reasons = [f.reason for f in records]

    def reason_at(self, t: int) -> str:
        k = bisect_right(self.times, t)
        return self.reasons[k - 1] if k else UNKNOWN_FAULT


def faulted_reason_durations(
    timeline: Timeline,
    faults: Union[Sequence[FaultRecord], FaultIndex],
    window: PeriodWindow,
) -> FaultReasonDurations:
    """Split FAULTED time in the window by cause.

    At every faulted instant the cause is the latest fault report at or
    before that instant (the last of equal-time reports wins); faulted time
    with no earlier report goes to ``unknown-fault``.
    """
    index = faults if isinstance(faults, FaultIndex) else FaultIndex(faults)
    times, reasons = index.times, index.reasons
    by_reason: dict[str, int] = {}

    def add(reason: str, secs: int) -> None:
        if secs > 0:
            by_reason[reason] = by_reason.get(reason, 0) + secs

    intervals = timeline.intervals
    i = _first_overlap(timeline, window)
    while i < len(intervals) and intervals[i].start < window.end:
        iv = intervals[i]
        i += 1
        if iv.status is not ChargerStatus.FAULTED:
            continue
        a, b = max(iv.start, window.start), min(iv.end, window.end)
        k = bisect_right(times, a)
        reason = reasons[k - 1] if k else UNKNOWN_FAULT
        cur = a
        while k < len(times) and times[k] < b:
            add(reason, times[k] - cur)
            cur, reason = times[k], reasons[k]
            k += 1
        add(reason, b - cur)
    return FaultReasonDurations(timeline.charger, window, by_reason)


# -- calendar periods -----------------------------------------------------------

class Granularity(str, enum.Enum):
    DAILY = "daily"
    WEEKLY = "weekly"
    MONTHLY = "monthly"
    YEARLY = "yearly"
    CUSTOM = "custom"


@dataclass(frozen=True)
class PeriodSpec:
    granularity: Granularity
    start: int
    end: int
    timezone: str = "UTC"

    def __post_init__(self) -> None:
        if self.start >= self.end:
            raise ValueError("period range start must precede end")


def get_zone(name: str) -> ZoneInfo:
    try:
        return ZoneInfo(name)
    except (ZoneInfoNotFoundError, ValueError) as exc:
        raise ConfigurationError(f"unknown timezone {name!r}") from exc


def _period_floor(d: date, g: Granularity) -> date:
    if g is Granularity.DAILY:
        return d
    if g is Granularity.WEEKLY:
        return d - timedelta(days=d.weekday())
    if g is Granularity.MONTHLY:
        return d.replace(day=1)
    return d.replace(month=1, day=1)


def _period_next(d: date, g: Granularity) -> date:
    if g is Granularity.DAILY:
        return d + timedelta(days=1)
    if g is Granularity.WEEKLY:
        return d + timedelta(days=7)
    if g is Granularity.MONTHLY:
        return date(d.year + d.month // 12, d.month % 12 + 1, 1)
    return date(d.year + 1, 1, 1)


def _label(d: date, g: Granularity) -> str:
    if g is Granularity.DAILY:
        return d.isoformat()
    if g is Granularity.WEEKLY:
        iso_year, week, _ = d.isocalendar()
        return f"{iso_year}-W{week:02d}"
    if g is Granularity.MONTHLY:
        return f"{d.year}-{d.month:02d}"
    return f"{d.year}"


def local_midnight(d: date, zone: ZoneInfo) -> int:
    return int(datetime(d.year, d.month, d.day, tzinfo=zone).timestamp())


def slice_periods(spec: PeriodSpec) -> list[PeriodWindow]:
    """Calendar-aligned windows in the requested timezone, clipped to the requested range."""
    zone = get_zone(spec.timezone)
    g = Granularity(spec.granularity)
    if g is Granularity.CUSTOM:
        fmt = lambda t: datetime.fromtimestamp(t, tz=timezone.utc).isoformat()  # noqa: E731
        return [PeriodWindow(spec.start, spec.end, f"{fmt(spec.start)}/{fmt(spec.end)}")]

    windows = []
    d = _period_floor(datetime.fromtimestamp(spec.start, tz=zone).date(), g)
    while True:
        lo, nxt = local_midnight(d, zone), _period_next(d, g)
        hi = local_midnight(nxt, zone)
        if lo >= spec.end:
            break
        a, b = max(lo, spec.start), min(hi, spec.end)
        if a < b:
            windows.append(PeriodWindow(a, b, _label(d, g)))
        d = nxt
    return windows
