"""File-export integration plugin.

Reads dashboard exports (status overview, charger events, charging sessions)
as CSV and turns them into raw data items. Each CSV needs a header row; the
file kind is recognised from its columns.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from chargerel.model import ChargerStatus
from chargerel.rawstore import ItemType, RawDataItem

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

OVERVIEW = "overview"
EVENTS = "events"
SESSIONS = "sessions"

SCHEMAS: dict[str, tuple[str, ...]] = {
    OVERVIEW: ("serial_number", "address", "latitude", "longitude", "status"),
    EVENTS: ("serial_number", "timestamp", "event_name"),
    SESSIONS: ("serial_number", "start_timestamp", "end_timestamp", "energy_kwh"),
}

# Source dashboards use free-form status words; matched case-insensitively.
SOURCE_STATUS_MAP: dict[str, ChargerStatus] = {
    "available": ChargerStatus.AVAILABLE,
    "idle": ChargerStatus.AVAILABLE,
    "occupied": ChargerStatus.OCCUPIED,
    "in use": ChargerStatus.OCCUPIED,
    "charging": ChargerStatus.OCCUPIED,
    "faulted": ChargerStatus.FAULTED,
    "fault": ChargerStatus.FAULTED,
    "unreachable": ChargerStatus.UNREACHABLE,
    "offline": ChargerStatus.UNREACHABLE,
    "unavailable": ChargerStatus.UNAVAILABLE,
    "out of service": ChargerStatus.UNAVAILABLE,
    "powered off": ChargerStatus.UNAVAILABLE,
    "unknown": ChargerStatus.UNKNOWN,
}


class ExportFormatError(ValueError):
    """File-level problem: unreadable header or missing required columns."""


def map_source_status(text: str) -> ChargerStatus:
    status = SOURCE_STATUS_MAP.get(text.strip().lower())
    if status is None:
        logger.warning("unrecognized source status %r mapped to UNKNOWN", text)
        return ChargerStatus.UNKNOWN
    return status


def parse_timestamp(text: str) -> int:
    """ISO-8601 with an explicit offset -> integer UTC epoch seconds (floored)."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ValueError(f"invalid timestamp {text!r}") from None
    if dt.tzinfo is None or dt.utcoffset() is None:
        raise ValueError(f"timestamp missing UTC offset: {text!r}")
    return int(dt.timestamp() // 1)


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


@dataclass
class AdapterDescriptor:
    name: str = "export_csv"
    version: str = "1"
    supported_item_types: frozenset = frozenset(ItemType)
    settings: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.supported_item_types:
            raise ValueError("adapter must support at least one item type")


@dataclass(frozen=True)
class StatusOverviewRow:
    serial_number: str
    address: str
    latitude: float
    longitude: float
    current_status: str


@dataclass
class Violation:
    line: Optional[int]  # None for file-level problems
    message: str


@dataclass
class ValidationReport:
    path: str
    kind: Optional[str]
    row_count: int = 0
    missing_columns: list[str] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.missing_columns and not self.violations


@dataclass
class Extraction:
    items: list[RawDataItem] = field(default_factory=list)
    rejected: list[tuple[str, Violation]] = field(default_factory=list)
    rows_read: int = 0


def detect_kind(columns: Sequence[str]) -> Optional[str]:
    cols = set(columns)
    if "event_name" in cols:
        return EVENTS
    if "start_timestamp" in cols or "end_timestamp" in cols:
        return SESSIONS
    if "status" in cols or "latitude" in cols:
        return OVERVIEW
    return None


def _read(path: PathLike) -> tuple[list[str], list[dict[str, str]]]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = [c.strip() for c in (reader.fieldnames or [])]
        rows = []
        for raw in reader:
            rows.append({k.strip(): (v or "").strip() for k, v in raw.items() if k is not None})
    return header, rows


def _check_row(kind: str, row: dict[str, str]) -> Optional[str]:
    """Return a violation message for a bad row, else None."""
    if not row.get("serial_number"):
        return "empty serial_number"
    try:
        if kind == OVERVIEW:
            lat, lon = float(row["latitude"]), float(row["longitude"])
            if not -90.0 <= lat <= 90.0:
                return f"latitude out of range: {lat}"
            if not -180.0 <= lon <= 180.0:
                return f"longitude out of range: {lon}"
        elif kind == EVENTS:
            if not row.get("event_name"):
                return "empty event_name"
            parse_timestamp(row["timestamp"])
        elif kind == SESSIONS:
            start = parse_timestamp(row["start_timestamp"])
            end = parse_timestamp(row["end_timestamp"])
            if end < start:
                return "negative session duration"
            if float(row["energy_kwh"]) < 0:
                return "negative energy_kwh"
    except ValueError as exc:
        return str(exc)
    return None


def validate_export(path: PathLike, expected: Optional[str] = None) -> ValidationReport:
    """Check a file against its schema without touching any store."""
    header, rows = _read(path)
    kind = expected or detect_kind(header)
    report = ValidationReport(path=str(path), kind=kind, row_count=len(rows))
    if kind is None:
        report.violations.append(Violation(None, "cannot determine export kind from header"))
        return report
    report.missing_columns = [c for c in SCHEMAS[kind] if c not in header]
    if report.missing_columns:
        report.violations.append(
            Violation(None, "missing required columns: " + ", ".join(report.missing_columns))
        )
        return report
    for lineno, row in enumerate(rows, start=2):
        msg = _check_row(kind, row)
        if msg:
            report.violations.append(Violation(lineno, msg))
    return report


def extract(
    descriptor: AdapterDescriptor,
    input_paths: Iterable[PathLike],
    extracted_at: Optional[int] = None,
) -> Extraction:
    """Parse export files into raw items.

    Bad rows are skipped and reported in ``Extraction.rejected``; a file with
    missing columns raises :class:`ExportFormatError` before anything is
    returned, so callers can store all-or-nothing.
    """
    if extracted_at is None:
        extracted_at = int(time.time())
    extras = {}
    if descriptor.settings.get("manufacturer"):
        extras["manufacturer"] = descriptor.settings["manufacturer"]

    out = Extraction()
    for path in input_paths:
        header, rows = _read(path)
        kind = detect_kind(header)
        if kind is None:
            raise ExportFormatError(f"{path}: cannot determine export kind from header {header}")
        missing = [c for c in SCHEMAS[kind] if c not in header]
        if missing:
            raise ExportFormatError(f"{path}: missing required columns: {', '.join(missing)}")
        out.rows_read += len(rows)

        good = []
        for lineno, row in enumerate(rows, start=2):
            msg = _check_row(kind, row)
            if msg:
                out.rejected.append((str(path), Violation(lineno, msg)))
                logger.warning("%s:%d rejected: %s", path, lineno, msg)
            else:
                good.append(row)

        if kind == OVERVIEW:
            if ItemType.StationOverview in descriptor.supported_item_types:
                payload = {"at": extracted_at, "rows": good, **extras}
                out.items.append(RawDataItem(ItemType.StationOverview, extracted_at, payload))
        elif kind == EVENTS:
            for row in good:
                payload = {**row, **extras, "at": parse_timestamp(row["timestamp"])}
                out.items.append(RawDataItem(ItemType.ChargerEvent, extracted_at, payload))
        else:
            for row in good:
                start = parse_timestamp(row["start_timestamp"])
                end = parse_timestamp(row["end_timestamp"])
                base = {**row, **extras, "start": start, "end": end}
                for item_type, at in (
                    (ItemType.ChargingSession, start),
                    (ItemType.ChargingSessionStart, start),
                    (ItemType.ChargingSessionEnd, end),
                ):
                    if item_type in descriptor.supported_item_types:
                        out.items.append(RawDataItem(item_type, extracted_at, {**base, "at": at}))
    return out
