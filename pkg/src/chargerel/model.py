"""Normalized charger information model and metric-domain value types."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date
from typing import Mapping, Optional

ChargerId = str
Timestamp = int  # integer seconds since the Unix epoch, UTC

UNKNOWN_FAULT = "unknown-fault"


class ChargerStatus(str, enum.Enum):
    OCCUPIED = "OCCUPIED"
    AVAILABLE = "AVAILABLE"
    UNAVAILABLE = "UNAVAILABLE"
    FAULTED = "FAULTED"
    UNREACHABLE = "UNREACHABLE"
    UNKNOWN = "UNKNOWN"

    @property
    def is_up(self) -> bool:
        """Up means in use or available for use."""
        return self in (ChargerStatus.OCCUPIED, ChargerStatus.AVAILABLE)


# Stable ordering used for reports, array encodings and CSV columns.
STATUSES: tuple[ChargerStatus, ...] = tuple(ChargerStatus)
DOWN_STATUSES = frozenset(
    {ChargerStatus.FAULTED, ChargerStatus.UNREACHABLE, ChargerStatus.UNAVAILABLE}
)


def _check_charger(charger: str) -> None:
    if not isinstance(charger, str) or not charger:
        raise ValueError("charger id must be a nonempty string")


def _check_ts(value: int, name: str) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise ValueError(f"{name} must be a nonnegative integer timestamp, got {value!r}")


@dataclass(frozen=True)
class ChargerMetadata:
    id: ChargerId
    manufacturer: str
    serial_number: str
    location: str = ""
    model: Optional[str] = None
    power_rating_kw: Optional[float] = None
    install_date: Optional[date] = None

    def __post_init__(self) -> None:
        _check_charger(self.id)
        if not self.serial_number:
            raise ValueError("serial_number must be nonempty")
        if self.power_rating_kw is not None and self.power_rating_kw < 0:
            raise ValueError("power_rating_kw must be >= 0")


@dataclass(frozen=True)
class StatusSample:
    charger: ChargerId
    at: Timestamp
    status: ChargerStatus

    def __post_init__(self) -> None:
        _check_charger(self.charger)
        _check_ts(self.at, "at")


@dataclass(frozen=True)
class FaultRecord:
    charger: ChargerId
    at: Timestamp
    reason: str

    def __post_init__(self) -> None:
        _check_charger(self.charger)
        _check_ts(self.at, "at")
        if not self.reason:
            raise ValueError("fault reason must be nonempty")


@dataclass(frozen=True)
class ChargingSession:
    charger: ChargerId
    start: Timestamp
    end: Timestamp
    energy_kwh: float

    def __post_init__(self) -> None:
        _check_charger(self.charger)
        _check_ts(self.start, "start")
        _check_ts(self.end, "end")
        if self.end < self.start:
            raise ValueError("negative session duration")
        if self.energy_kwh < 0:
            raise ValueError("energy_kwh must be >= 0")


@dataclass(frozen=True, order=True)
class PeriodWindow:
    """Half-open ``[start, end)`` span of UTC seconds with a display label."""

    start: Timestamp
    end: Timestamp
    label: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        _check_ts(self.start, "start")
        _check_ts(self.end, "end")
        if self.start >= self.end:
            raise ValueError(f"window start must precede end ({self.start} >= {self.end})")

    @property
    def duration_seconds(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class StateDurations:
    charger: ChargerId
    window: PeriodWindow
    seconds_by_state: Mapping[ChargerStatus, int]

    def __post_init__(self) -> None:
        full = {s: int(self.seconds_by_state.get(s, 0)) for s in STATUSES}
        if any(v < 0 for v in full.values()):
            raise ValueError("state durations must be nonnegative")
        if sum(full.values()) != self.window.duration_seconds:
            raise ValueError(
                f"state durations sum to {sum(full.values())}, "
                f"window is {self.window.duration_seconds} s"
            )
        object.__setattr__(self, "seconds_by_state", full)

    def __getitem__(self, status: ChargerStatus) -> int:
        return self.seconds_by_state[status]


@dataclass(frozen=True)
class FaultReasonDurations:
    charger: ChargerId
    window: PeriodWindow
    seconds_by_reason: Mapping[str, int]

    @property
    def faulted_seconds(self) -> int:
        return sum(self.seconds_by_reason.values())


@dataclass(frozen=True)
class MetricsRow:
    """One charger's metrics over one window.

    ``uptime_pct`` is ``None`` when the uptime policy leaves an empty
    denominator (an all-UNKNOWN window with UNKNOWN excluded).
    """

    charger: ChargerId
    window: PeriodWindow
    uptime_pct: Optional[float]
    fault_time_pct: float
    unreachable_time_pct: float
    unavailable_time_pct: float
    unknown_time_pct: float
    fault_reason_pct: Mapping[str, float] = field(default_factory=dict)
