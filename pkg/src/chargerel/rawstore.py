"""Append-only raw data table with a processing queue.

Extracted items are stored verbatim as JSON and handed to normalization in
chronological order. Processed items are kept forever as the historical record.
"""
from __future__ import annotations

import enum
import json
import logging
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Union

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ItemType(str, enum.Enum):
    StationOverview = "StationOverview"
    ChargerEvent = "ChargerEvent"
    ChargingSession = "ChargingSession"
    ChargingSessionStart = "ChargingSessionStart"
    ChargingSessionEnd = "ChargingSessionEnd"


class StoreError(RuntimeError):
    """Fatal storage failure (IO, corruption, full disk)."""


class NotFoundError(KeyError):
    pass


@dataclass(frozen=True)
class RawDataItem:
    item_type: ItemType
    extracted_at: int
    payload: dict[str, Any]
    processed: bool = False
    raw_id: Optional[int] = None
    # canonical JSON text of ``payload`` as stored; filled in on reads
    payload_text: Optional[str] = field(default=None, compare=False, repr=False)

    @property
    def event_at(self) -> int:
        """Chronological sort key: payload event time when supplied."""
        at = self.payload.get("at")
        return int(at) if isinstance(at, int) else self.extracted_at


def canonical_json(payload: dict[str, Any]) -> str:
    """Key-sorted, compact JSON; the stored form of every payload."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


_DDL = """
CREATE TABLE IF NOT EXISTS schema_version (version INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS raw_items (
    raw_id INTEGER PRIMARY KEY AUTOINCREMENT,
    extracted_at INTEGER NOT NULL,
    processed INTEGER NOT NULL DEFAULT 0,
    item_type TEXT NOT NULL,
    event_at INTEGER NOT NULL,
    payload TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS raw_items_queue ON raw_items (processed, event_at, raw_id);
"""


class RawStore:
    """Single-file SQLite store. Use as a context manager or call ``close``."""

    def __init__(self, path: Union[str, Path]):
        self.path = str(path)
        try:
            self._conn = sqlite3.connect(self.path)
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA synchronous=NORMAL")
            self._conn.executescript(_DDL)
            row = self._conn.execute("SELECT version FROM schema_version").fetchone()
            if row is None:
                self._conn.execute("INSERT INTO schema_version VALUES (?)", (SCHEMA_VERSION,))
            elif row[0] != SCHEMA_VERSION:
                raise StoreError(f"unsupported raw store schema version {row[0]}")
            self._conn.commit()
        except sqlite3.Error as exc:
            raise StoreError(f"cannot open raw store {self.path}: {exc}") from exc

    def __enter__(self) -> "RawStore":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def close(self) -> None:
        self._conn.close()

    def store_raw(self, item: RawDataItem) -> int:
        return self.store_many([item])[0]

    def store_many(self, items: Iterable[RawDataItem]) -> list[int]:
        """Persist items atomically; either all are stored or none."""
        rows = [
            (item.extracted_at, ItemType(item.item_type).value, item.event_at, canonical_json(item.payload))
            for item in items
        ]
        try:
            with self._conn:
                before = self._conn.execute("SELECT seq FROM sqlite_sequence "
                                            "WHERE name = 'raw_items'").fetchone()
                self._conn.executemany(
                    "INSERT INTO raw_items (extracted_at, processed, item_type, event_at, payload) "
                    "VALUES (?, 0, ?, ?, ?)",
                    rows,
                )
        except sqlite3.Error as exc:
            raise StoreError(f"failed to store raw items: {exc}") from exc
        # AUTOINCREMENT inside one write transaction hands out consecutive ids.
        first = (before[0] if before else 0) + 1
        return list(range(first, first + len(rows)))

    def fetch_unprocessed(self, limit: int = 1000) -> list[RawDataItem]:
        if limit <= 0:
            raise ValueError("limit must be positive")
        rows = self._conn.execute(
            "SELECT raw_id, extracted_at, item_type, payload FROM raw_items "
            "WHERE processed = 0 ORDER BY event_at, raw_id LIMIT ?",
            (limit,),
        ).fetchall()
        return [
            RawDataItem(ItemType(t), ext, json.loads(p), False, rid, p) for rid, ext, t, p in rows
        ]

    def mark_processed(self, raw_id: int) -> None:
        self.mark_many([raw_id])

    def mark_many(self, raw_ids: Iterable[int]) -> None:
        """Mark items processed atomically; unknown ids abort the whole call."""
        ids = sorted(set(raw_ids))
        with self._conn:
            cur = self._conn.executemany(
                "UPDATE raw_items SET processed = 1 WHERE raw_id = ?", [(rid,) for rid in ids]
            )
            if cur.rowcount != len(ids):
                for rid in ids:
                    if self._conn.execute("SELECT 1 FROM raw_items WHERE raw_id = ?",
                                          (rid,)).fetchone() is None:
                        raise NotFoundError(rid)

    def reset_processed(self) -> int:
        """Re-queue every item. Returns the number of items re-queued."""
        with self._conn:
            cur = self._conn.execute("UPDATE raw_items SET processed = 0 WHERE processed = 1")
        return cur.rowcount

    def get(self, raw_id: int) -> RawDataItem:
        row = self._conn.execute(
            "SELECT raw_id, extracted_at, processed, item_type, payload FROM raw_items "
            "WHERE raw_id = ?",
            (raw_id,),
        ).fetchone()
        if row is None:
            raise NotFoundError(raw_id)
        rid, ext, proc, t, p = row
        return RawDataItem(ItemType(t), ext, json.loads(p), bool(proc), rid, p)

    def count(self, processed: Optional[bool] = None) -> int:
        if processed is None:
            return self._conn.execute("SELECT COUNT(*) FROM raw_items").fetchone()[0]
        return self._conn.execute(
            "SELECT COUNT(*) FROM raw_items WHERE processed = ?", (int(processed),)
        ).fetchone()[0]
