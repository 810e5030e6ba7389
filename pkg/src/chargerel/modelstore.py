"""SQLite persistence for the normalized charger information model.

Holds charger metadata, status samples, fault reports, sessions, overview
presence (for decommissioning), the normalization idempotence log, the
quarantine list and computed metric rows.
"""
from __future__ import annotations

import json
import sqlite3
from collections import defaultdict
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Optional, Union

from chargerel.model import (
    ChargerMetadata,
    ChargerStatus,
    ChargingSession,
    FaultRecord,
    MetricsRow,
    PeriodWindow,
    StatusSample,
)

_DDL = """
CREATE TABLE IF NOT EXISTS chargers (
    id TEXT PRIMARY KEY,
    manufacturer TEXT NOT NULL,
    serial_number TEXT NOT NULL,
    location TEXT NOT NULL DEFAULT '',
    model TEXT,
    power_rating_kw REAL,
    install_date TEXT,
    UNIQUE (manufacturer, serial_number)
);
CREATE TABLE IF NOT EXISTS status_samples (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    charger TEXT NOT NULL,
    at INTEGER NOT NULL,
    status TEXT NOT NULL,
    raw_id INTEGER
);
CREATE INDEX IF NOT EXISTS status_by_charger ON status_samples (charger, at, seq);
CREATE TABLE IF NOT EXISTS faults (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    charger TEXT NOT NULL,
    at INTEGER NOT NULL,
    reason TEXT NOT NULL,
    raw_id INTEGER
);
CREATE TABLE IF NOT EXISTS sessions (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    charger TEXT NOT NULL,
    start INTEGER NOT NULL,
    "end" INTEGER NOT NULL,
    energy_kwh REAL NOT NULL,
    raw_id INTEGER
);
CREATE TABLE IF NOT EXISTS overview_presence (
    at INTEGER NOT NULL,
    charger TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS overview_snapshots (at INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS applied (digest BLOB PRIMARY KEY, raw_id INTEGER);
CREATE TABLE IF NOT EXISTS quarantine (raw_id INTEGER, error TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS metrics (
    granularity TEXT NOT NULL,
    charger TEXT NOT NULL,
    win_start INTEGER NOT NULL,
    win_end INTEGER NOT NULL,
    label TEXT NOT NULL,
    row TEXT NOT NULL,
    PRIMARY KEY (granularity, charger, win_start)
);
"""

_TABLES = (
    "chargers", "status_samples", "faults", "sessions", "overview_presence",
    "overview_snapshots", "applied", "quarantine", "metrics",
)


@dataclass
class ChargerHistory:
    """Everything timeline/metric computation needs for one charger."""

    samples: list[StatusSample]
    faults: list[FaultRecord]


class ModelStore:
    def __init__(self, path: Union[str, Path] = ":memory:"):
        self.path = str(path)
        self._conn = sqlite3.connect(self.path)
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA synchronous=NORMAL")
        self._conn.executescript(_DDL)
        self._conn.commit()
        # charger -> (at, status) of the latest sample by (at, seq)
        self._latest: dict[str, tuple[int, ChargerStatus]] = {}
        self._known: set[str] = {r[0] for r in self._conn.execute("SELECT id FROM chargers")}
        # Appends are buffered per statement and flushed before any read or commit.
        self._pending: dict[str, list[tuple]] = defaultdict(list)

    def _flush(self) -> None:
        for sql, rows in self._pending.items():
            if rows:
                self._conn.executemany(sql, rows)
        self._pending.clear()

    def __enter__(self) -> "ModelStore":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def close(self) -> None:
        self._flush()
        self._conn.commit()
        self._conn.close()

    def commit(self) -> None:
        self._flush()
        self._conn.commit()

    def clear(self) -> None:
        """Drop all normalized content (used before a full rebuild)."""
        self._pending.clear()
        with self._conn:
            for table in _TABLES:
                self._conn.execute(f"DELETE FROM {table}")
        self._latest.clear()
        self._known.clear()

    # -- idempotence / quarantine ------------------------------------------
    def is_applied(self, digest: bytes) -> bool:
        self._flush()
        return self._conn.execute(
            "SELECT 1 FROM applied WHERE digest = ?", (digest,)
        ).fetchone() is not None

    def mark_applied(self, digest: bytes, raw_id: Optional[int]) -> None:
        self._pending["INSERT OR IGNORE INTO applied VALUES (?, ?)"].append((digest, raw_id))

    def applied_among(self, digests: Iterable[bytes]) -> set[bytes]:
        """The subset of ``digests`` already recorded as applied."""
        self._flush()
        wanted = list(dict.fromkeys(digests))
        found: set[bytes] = set()
        for i in range(0, len(wanted), 500):
            chunk = wanted[i:i + 500]
            marks = ",".join("?" * len(chunk))
            found.update(r[0] for r in self._conn.execute(
                f"SELECT digest FROM applied WHERE digest IN ({marks})", chunk))
        return found

    def quarantine(self, raw_id: Optional[int], error: str) -> None:
        self._conn.execute("INSERT INTO quarantine VALUES (?, ?)", (raw_id, error))

    def quarantined(self) -> list[tuple[int, str]]:
        self._flush()
        return self._conn.execute("SELECT raw_id, error FROM quarantine ORDER BY rowid").fetchall()

    # -- writes ---------------------------------------------------------------
    def has_charger(self, charger_id: str) -> bool:
        return charger_id in self._known

    def upsert_charger(self, meta: ChargerMetadata) -> None:
        """Create the charger if new; otherwise fill in blank descriptive fields."""
        if meta.id not in self._known:
            self._conn.execute(
                "INSERT INTO chargers VALUES (?, ?, ?, ?, ?, ?, ?)",
                (meta.id, meta.manufacturer, meta.serial_number, meta.location, meta.model,
                 meta.power_rating_kw,
                 meta.install_date.isoformat() if meta.install_date else None),
            )
            self._known.add(meta.id)
        elif meta.location:
            self._conn.execute(
                "UPDATE chargers SET location = ? WHERE id = ? AND location = ''",
                (meta.location, meta.id),
            )

    def append_sample(self, sample: StatusSample, raw_id: Optional[int] = None) -> None:
        cached = self._latest.get(sample.charger)
        if cached is None:
            # Cold cache: earlier runs may have left later samples on disk.
            cached = self._latest_from_db(sample.charger)
        if cached is None or sample.at >= cached[0]:
            cached = (sample.at, sample.status)
        self._latest[sample.charger] = cached
        self._pending[
            "INSERT INTO status_samples (charger, at, status, raw_id) VALUES (?, ?, ?, ?)"
        ].append((sample.charger, sample.at, sample.status.value, raw_id))

    def append_fault(self, record: FaultRecord, raw_id: Optional[int] = None) -> None:
        self._pending["INSERT INTO faults (charger, at, reason, raw_id) VALUES (?, ?, ?, ?)"].append(
            (record.charger, record.at, record.reason, raw_id))

    def insert_session(self, session: ChargingSession, raw_id: Optional[int] = None) -> None:
        self._pending[
            'INSERT INTO sessions (charger, start, "end", energy_kwh, raw_id) VALUES (?, ?, ?, ?, ?)'
        ].append((session.charger, session.start, session.end, session.energy_kwh, raw_id))

    def record_overview(self, at: int, chargers: Iterable[str]) -> None:
        self._conn.execute("INSERT INTO overview_snapshots VALUES (?)", (at,))
        self._conn.executemany(
            "INSERT INTO overview_presence VALUES (?, ?)", [(at, c) for c in chargers]
        )

    # -- reads ----------------------------------------------------------------
    def _latest_from_db(self, charger: str) -> Optional[tuple[int, ChargerStatus]]:
        self._flush()
        row = self._conn.execute(
            "SELECT at, status FROM status_samples WHERE charger = ? "
            "ORDER BY at DESC, seq DESC LIMIT 1",
            (charger,),
        ).fetchone()
        return None if row is None else (row[0], ChargerStatus(row[1]))

    def status_at(self, charger: str, at: int) -> ChargerStatus:
        """Status of the last sample at or before ``at``; UNKNOWN if none."""
        cached = self._latest.get(charger)
        if cached is None:
            cached = self._latest_from_db(charger)
            if cached is None:
                return ChargerStatus.UNKNOWN
            self._latest[charger] = cached
        if at >= cached[0]:
            return cached[1]
        self._flush()
        row = self._conn.execute(
            "SELECT status FROM status_samples WHERE charger = ? AND at <= ? "
            "ORDER BY at DESC, seq DESC LIMIT 1",
            (charger, at),
        ).fetchone()
        return ChargerStatus.UNKNOWN if row is None else ChargerStatus(row[0])

    def charger_ids(self) -> list[str]:
        return sorted(self._known)

    def charger(self, charger_id: str) -> ChargerMetadata:
        row = self._conn.execute("SELECT * FROM chargers WHERE id = ?", (charger_id,)).fetchone()
        if row is None:
            raise KeyError(charger_id)
        cid, man, serial, loc, model, kw, inst = row
        return ChargerMetadata(cid, man, serial, loc, model, kw,
                               date.fromisoformat(inst) if inst else None)

    def samples(self, charger: Optional[str] = None) -> list[StatusSample]:
        self._flush()
        sql = "SELECT charger, at, status FROM status_samples"
        args: tuple = ()
        if charger is not None:
            sql += " WHERE charger = ?"
            args = (charger,)
        sql += " ORDER BY charger, at, seq"
        return [StatusSample(c, a, ChargerStatus(s)) for c, a, s in self._conn.execute(sql, args)]

    def faults(self, charger: Optional[str] = None) -> list[FaultRecord]:
        self._flush()
        sql = "SELECT charger, at, reason FROM faults"
        args: tuple = ()
        if charger is not None:
            sql += " WHERE charger = ?"
            args = (charger,)
        sql += " ORDER BY charger, at, seq"
        return [FaultRecord(c, a, r) for c, a, r in self._conn.execute(sql, args)]

    def sessions(self) -> list[ChargingSession]:
        self._flush()
        rows = self._conn.execute(
            'SELECT charger, start, "end", energy_kwh FROM sessions ORDER BY charger, start, seq'
        )
        return [ChargingSession(c, s, e, kwh) for c, s, e, kwh in rows]

    def histories(self) -> dict[str, ChargerHistory]:
        """Bulk load samples and faults for every known charger."""
        out = {cid: ChargerHistory([], []) for cid in self.charger_ids()}
        for s in self.samples():
            out.setdefault(s.charger, ChargerHistory([], [])).samples.append(s)
        for f in self.faults():
            out.setdefault(f.charger, ChargerHistory([], [])).faults.append(f)
        return out

    def overview_presence(self) -> tuple[list[int], dict[str, list[int]]]:
        """(all snapshot times, charger -> snapshot times listing it)."""
        self._flush()
        snaps = sorted({r[0] for r in self._conn.execute("SELECT at FROM overview_snapshots")})
        seen: dict[str, list[int]] = defaultdict(list)
        for at, c in self._conn.execute("SELECT at, charger FROM overview_presence ORDER BY at"):
            seen[c].append(at)
        return snaps, dict(seen)

    def table_counts(self) -> dict[str, int]:
        self._flush()
        return {
            t: self._conn.execute(f"SELECT COUNT(*) FROM {t}").fetchone()[0] for t in _TABLES
        }

    # -- metric rows ----------------------------------------------------------
    def save_metrics(self, granularity: str, rows: Iterable[MetricsRow]) -> int:
        data = [
            (granularity, r.charger, r.window.start, r.window.end, r.window.label,
             json.dumps(metrics_row_to_dict(r), sort_keys=True))
            for r in rows
        ]
        with self._conn:
            self._conn.execute("DELETE FROM metrics WHERE granularity = ?", (granularity,))
            self._conn.executemany("INSERT INTO metrics VALUES (?, ?, ?, ?, ?, ?)", data)
        return len(data)

    def load_metrics(self, granularity: str) -> list[MetricsRow]:
        rows = self._conn.execute(
            "SELECT row FROM metrics WHERE granularity = ? ORDER BY win_start, charger",
            (granularity,),
        )
        return [metrics_row_from_dict(json.loads(r[0])) for r in rows]

    def metric_granularities(self) -> list[str]:
        return [r[0] for r in self._conn.execute(
            "SELECT DISTINCT granularity FROM metrics ORDER BY granularity")]


def metrics_row_to_dict(row: MetricsRow) -> dict:
    return {
        "charger": row.charger,
        "window_start": row.window.start,
        "window_end": row.window.end,
        "window_label": row.window.label,
        "uptime_pct": row.uptime_pct,
        "fault_time_pct": row.fault_time_pct,
        "unreachable_time_pct": row.unreachable_time_pct,
        "unavailable_time_pct": row.unavailable_time_pct,
        "unknown_time_pct": row.unknown_time_pct,
        "fault_reason_pct": dict(sorted(row.fault_reason_pct.items())),
    }


def metrics_row_from_dict(d: dict) -> MetricsRow:
    return MetricsRow(
        charger=d["charger"],
        window=PeriodWindow(d["window_start"], d["window_end"], d["window_label"]),
        uptime_pct=d["uptime_pct"],
        fault_time_pct=d["fault_time_pct"],
        unreachable_time_pct=d["unreachable_time_pct"],
        unavailable_time_pct=d["unavailable_time_pct"],
        unknown_time_pct=d["unknown_time_pct"],
        fault_reason_pct=d["fault_reason_pct"],
    )
