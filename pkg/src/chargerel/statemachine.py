"""Event classification and status inference for normalization.

Charger event logs carry only a name. Names are classified into categories
by ordered pattern rules, and a memoryless state machine maps
(current status, category) to the status at the time of the event.
"""
from __future__ import annotations

import enum
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence, Union

from chargerel.adapter_export import map_source_status
from chargerel.model import (
    ChargerMetadata,
    ChargerStatus,
    ChargingSession,
    FaultRecord,
    StatusSample,
)
from chargerel.modelstore import ModelStore
from chargerel.rawstore import ItemType, RawDataItem, canonical_json

logger = logging.getLogger(__name__)

S = ChargerStatus


class EventCategory(str, enum.Enum):
    INFORMATIONAL = "INFORMATIONAL"
    FAULT = "FAULT"
    FAULT_CLEARED = "FAULT_CLEARED"
    NETWORK_LOST = "NETWORK_LOST"
    NETWORK_RESTORED = "NETWORK_RESTORED"
    POWER_OFF = "POWER_OFF"
    POWER_ON = "POWER_ON"


C = EventCategory


@dataclass(frozen=True)
class Rule:
    pattern: str
    category: EventCategory
    exact: bool = False

    def matches(self, name: str) -> bool:
        pat, text = self.pattern.casefold(), name.casefold()
        return text.strip() == pat.strip() if self.exact else pat in text


@dataclass(frozen=True)
class ClassificationRules:
    rules: tuple[Rule, ...] = ()
    default_category: EventCategory = EventCategory.INFORMATIONAL

    @classmethod
    def from_config(cls, entries: Sequence[dict[str, Any]]) -> "ClassificationRules":
        """Build from ``[{pattern, category, match: substring|exact}, ...]``."""
        rules = []
        for e in entries:
            match = str(e.get("match", "substring")).lower()
            if match not in ("substring", "exact"):
                raise ValueError(f"unknown match mode {match!r} in event rule {e!r}")
            rules.append(Rule(str(e["pattern"]), EventCategory(str(e["category"]).upper()),
                              match == "exact"))
        return cls(tuple(rules))


# Order matters: "Fault Cleared" must be caught before the generic "fault".
DEFAULT_RULES = ClassificationRules((
    Rule("fault cleared", C.FAULT_CLEARED),
    Rule("fault resolved", C.FAULT_CLEARED),
    Rule("network restored", C.NETWORK_RESTORED),
    Rule("connection restored", C.NETWORK_RESTORED),
    Rule("communication restored", C.NETWORK_RESTORED),
    Rule("network lost", C.NETWORK_LOST),
    Rule("connection lost", C.NETWORK_LOST),
    Rule("communication lost", C.NETWORK_LOST),
    Rule("unreachable", C.NETWORK_LOST),
    Rule("power on", C.POWER_ON),
    Rule("powered on", C.POWER_ON),
    Rule("power restored", C.POWER_ON),
    Rule("power off", C.POWER_OFF),
    Rule("powered off", C.POWER_OFF),
    Rule("power down", C.POWER_OFF),
    Rule("power loss", C.POWER_OFF),
    Rule("tamper detect", C.FAULT),
    Rule("hardware fault", C.FAULT),
    Rule("maintenance required", C.FAULT),
    Rule("data partition full", C.FAULT),
    Rule("fault", C.FAULT),
    Rule("error", C.FAULT),
    Rule("failure", C.FAULT),
))


def classify_event(name: str, rules: ClassificationRules = DEFAULT_RULES) -> EventCategory:
    if not name:
        raise ValueError("event name must be nonempty")
    for rule in rules.rules:
        if rule.matches(name):
            return rule.category
    return rules.default_category


def next_status(current: ChargerStatus, category: EventCategory) -> ChargerStatus:
    if category is C.INFORMATIONAL:
        return current
    if category is C.FAULT:
        return S.FAULTED
    if category is C.FAULT_CLEARED:
        return S.AVAILABLE if current is S.FAULTED else current
    if category is C.NETWORK_LOST:
        return current if current is S.UNAVAILABLE else S.UNREACHABLE
    if category is C.NETWORK_RESTORED:
        return S.AVAILABLE if current is S.UNREACHABLE else current
    if category is C.POWER_OFF:
        return S.UNAVAILABLE
    if category is C.POWER_ON:
        return S.AVAILABLE if current is S.UNAVAILABLE else current
    raise AssertionError(f"unhandled category {category!r}")


# -- normalization ------------------------------------------------------------

class PayloadError(ValueError):
    """Payload does not fit the schema its item type claims."""


@dataclass(frozen=True)
class UpsertCharger:
    meta: ChargerMetadata


@dataclass(frozen=True)
class AppendSample:
    sample: StatusSample


@dataclass(frozen=True)
class AppendFault:
    record: FaultRecord


@dataclass(frozen=True)
class InsertSession:
    session: ChargingSession


@dataclass(frozen=True)
class RecordOverview:
    at: int
    chargers: tuple[str, ...]


Mutation = Union[UpsertCharger, AppendSample, AppendFault, InsertSession, RecordOverview]


def item_digest(item: RawDataItem) -> bytes:
    """Content key for idempotent application: type plus canonical payload."""
    body = item.payload_text
    if body is None:
        body = canonical_json(item.payload)
    return hashlib.sha256(f"{ItemType(item.item_type).value}\n{body}".encode()).digest()


def _str(payload: dict, key: str) -> str:
    value = payload.get(key)
    if not isinstance(value, str) or not value.strip():
        raise PayloadError(f"missing or empty {key!r}")
    return value.strip()


def _int(payload: dict, key: str) -> int:
    value = payload.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise PayloadError(f"{key!r} must be a nonnegative integer timestamp")
    return value


def _meta(serial: str, payload: dict, location: str = "") -> ChargerMetadata:
    return ChargerMetadata(serial, payload.get("manufacturer") or "unknown", serial, location)


def plan_mutations(
    item: RawDataItem, model: ModelStore, rules: ClassificationRules = DEFAULT_RULES
) -> list[Mutation]:
    """Mutations implied by one raw item, given the model's current state."""
    p = item.payload
    if not isinstance(p, dict):
        raise PayloadError("payload is not an object")
    kind = ItemType(item.item_type)

    if kind is ItemType.StationOverview:
        rows = p.get("rows")
        if not isinstance(rows, list):
            raise PayloadError("StationOverview payload needs a 'rows' list")
        out: list[Mutation] = []
        seen = []
        for row in rows:
            if not isinstance(row, dict):
                raise PayloadError("overview row is not an object")
            serial = _str(row, "serial_number")
            status = map_source_status(str(row.get("status", "")))
            out.append(UpsertCharger(_meta(serial, p, str(row.get("address", "")))))
            out.append(AppendSample(StatusSample(serial, item.extracted_at, status)))
            seen.append(serial)
        out.append(RecordOverview(item.extracted_at, tuple(seen)))
        return out

    serial = _str(p, "serial_number")
    upsert = UpsertCharger(_meta(serial, p))

    if kind is ItemType.ChargerEvent:
        name = _str(p, "event_name")
        at = _int(p, "at")
        category = classify_event(name, rules)
        out = [upsert]
        if category is C.FAULT:
            out.append(AppendFault(FaultRecord(serial, at, name)))
        current = model.status_at(serial, at)
        new = next_status(current, category)
        if new is not current:
            out.append(AppendSample(StatusSample(serial, at, new)))
        return out

    start, end = _int(p, "start"), _int(p, "end")
    if kind is ItemType.ChargingSession:
        try:
            energy = float(p.get("energy_kwh"))
            session = ChargingSession(serial, start, end, energy)
        except (TypeError, ValueError) as exc:
            raise PayloadError(f"bad session: {exc}") from None
        return [upsert, InsertSession(session)]
    if kind is ItemType.ChargingSessionStart:
        return [upsert, AppendSample(StatusSample(serial, start, S.OCCUPIED))]
    return [upsert, AppendSample(StatusSample(serial, end, S.AVAILABLE))]


def apply_mutations(model: ModelStore, mutations: Iterable[Mutation], raw_id: Optional[int]) -> None:
    for m in mutations:
        if isinstance(m, UpsertCharger):
            model.upsert_charger(m.meta)
        elif isinstance(m, AppendSample):
            model.append_sample(m.sample, raw_id)
        elif isinstance(m, AppendFault):
            model.append_fault(m.record, raw_id)
        elif isinstance(m, InsertSession):
            model.insert_session(m.session, raw_id)
        elif isinstance(m, RecordOverview):
            model.record_overview(m.at, m.chargers)
        else:
            raise TypeError(m)


def apply_raw_item(
    item: RawDataItem, model: ModelStore, rules: ClassificationRules = DEFAULT_RULES
) -> list[Mutation]:
    """Apply one raw item to the model and return what changed.

    Items already applied (same type and payload) return ``[]``. Raises
    :class:`PayloadError` for malformed payloads, leaving the model untouched.
    """
    digest = item_digest(item)
    if model.is_applied(digest):
        return []
    mutations = plan_mutations(item, model, rules)
    apply_mutations(model, mutations, item.raw_id)
    model.mark_applied(digest, item.raw_id)
    return mutations


@dataclass
class NormalizeSummary:
    processed: int = 0
    quarantined: int = 0
    duplicates: int = 0
    errors: list[tuple[Optional[int], str]] = field(default_factory=list)


def normalize(raw_store, model: ModelStore, rules: ClassificationRules = DEFAULT_RULES,
              batch_size: int = 5000) -> NormalizeSummary:
    """Drain the raw queue in chronological order into the model."""
    summary = NormalizeSummary()
    while True:
        batch = raw_store.fetch_unprocessed(batch_size)
        if not batch:
            break
        digests = [item_digest(item) for item in batch]
        done = model.applied_among(digests)
        for item, digest in zip(batch, digests):
            if digest in done:
                summary.duplicates += 1
                continue
            try:
                mutations = plan_mutations(item, model, rules)
            except (PayloadError, ValueError) as exc:
                logger.error("raw item %s quarantined: %s", item.raw_id, exc)
                model.quarantine(item.raw_id, str(exc))
                summary.quarantined += 1
                summary.errors.append((item.raw_id, str(exc)))
                continue
            apply_mutations(model, mutations, item.raw_id)
            model.mark_applied(digest, item.raw_id)
            done.add(digest)
            summary.processed += 1
        model.commit()
        raw_store.mark_many(i.raw_id for i in batch)
    return summary
