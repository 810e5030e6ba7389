"""Synthetic charger fleets with known ground truth.

Each charger follows a small Markov process over the five observable
states. Every state change is emitted as the export row that the default
classification rules map back to that change, so the pipeline can rebuild
the truth exactly. ``oracle_metrics`` recomputes metrics from the truth one
second at a time, without touching the interval code in ``timeline``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import yaml

from chargerel.metrics import UnknownPolicy, UptimePolicy
from chargerel.model import (
    UNKNOWN_FAULT,
    ChargerStatus,
    FaultReasonDurations,
    MetricsRow,
    PeriodWindow,
    StateDurations,
    STATUSES,
)
from chargerel.statemachine import DEFAULT_RULES, ClassificationRules, EventCategory, classify_event

S = ChargerStatus

FAULT_CLEARED_EVENT = "Fault Cleared"
NETWORK_LOST_EVENT = "Network Connection Lost"
NETWORK_RESTORED_EVENT = "Network Connection Restored"
POWER_OFF_EVENT = "Power Off"
POWER_ON_EVENT = "Power On"
INFO_EVENTS = ("Firmware Heartbeat", "Configuration Updated", "Firmware Update Available")

SOURCE_STATUS_WORDS = {
    S.AVAILABLE: "Available",
    S.OCCUPIED: "In Use",
    S.FAULTED: "Faulted",
    S.UNREACHABLE: "Unreachable",
    S.UNAVAILABLE: "Unavailable",
    S.UNKNOWN: "Unknown",
}

DISRUPTIONS = (S.FAULTED, S.UNREACHABLE, S.UNAVAILABLE)


class ScenarioError(ValueError):
    pass


def _parse_instant(value: Union[int, str, datetime]) -> int:
    if isinstance(value, int):
        return value
    if isinstance(value, datetime):
        dt = value
    else:
        dt = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


@dataclass
class FleetScenario:
    seed: int = 42
    charger_count: int = 98
    start: int = 1514764800  # 2018-01-01T00:00:00Z
    end: int = 1735689600  # 2025-01-01T00:00:00Z
    # Mean dwell seconds per state. AVAILABLE is the mean time between
    # disruptions (faults, network loss, power-off); sessions arrive on top.
    dwell_means: dict[str, float] = field(default_factory=lambda: {
        "AVAILABLE": 20 * 86400.0,
        "OCCUPIED": 2.5 * 3600.0,
        "FAULTED": 1.5 * 86400.0,
        "UNREACHABLE": 6 * 3600.0,
        "UNAVAILABLE": 12 * 3600.0,
    })
    disruption_weights: dict[str, float] = field(default_factory=lambda: {
        "FAULTED": 0.45, "UNREACHABLE": 0.45, "UNAVAILABLE": 0.10,
    })
    fault_reasons: dict[str, float] = field(default_factory=lambda: {
        "Tamper Detect": 0.2,
        "Hardware Fault": 0.3,
        "Maintenance Required": 0.35,
        "Data Partition Full": 0.15,
    })
    session_rate_per_hour: float = 0.05
    zombie_fraction: float = 0.05
    zombie_dwell_multiplier: float = 30.0
    refault_probability: float = 0.15
    fault_to_unreachable_probability: float = 0.05
    unreachable_to_power_off_probability: float = 0.05
    info_events_per_day: float = 0.2
    commission_spread: float = 0.0  # fraction of the horizon over which chargers come online
    power_kw: float = 6.0
    export_utc_offset_minutes: int = 0
    latitude: float = 37.4275
    longitude: float = -122.1697

    def __post_init__(self) -> None:
        self.start = _parse_instant(self.start)
        self.end = _parse_instant(self.end)
        self.validate()

    def validate(self, rules: ClassificationRules = DEFAULT_RULES) -> None:
        if self.charger_count < 1:
            raise ScenarioError("charger_count must be positive")
        if self.start < 0 or self.start >= self.end:
            raise ScenarioError("horizon start must precede end")
        for state in ("AVAILABLE", "OCCUPIED", "FAULTED", "UNREACHABLE", "UNAVAILABLE"):
            mean = self.dwell_means.get(state)
            if mean is None or not mean > 0 or math.isinf(mean):
                raise ScenarioError(f"dwell mean for {state} must be positive and finite")
        weights = [self.disruption_weights.get(s.value, 0.0) for s in DISRUPTIONS]
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ScenarioError("disruption weights must be nonnegative with a positive sum")
        if not self.fault_reasons or any(w < 0 for w in self.fault_reasons.values()) \
                or sum(self.fault_reasons.values()) <= 0:
            raise ScenarioError("fault reason weights must be nonnegative with a positive sum")
        for reason in self.fault_reasons:
            if classify_event(reason, rules) is not EventCategory.FAULT:
                raise ScenarioError(f"fault reason {reason!r} is not classified as a fault")
        if self.session_rate_per_hour <= 0:
            raise ScenarioError("session_rate_per_hour must be positive")
        for name in ("zombie_fraction", "refault_probability", "commission_spread",
                     "fault_to_unreachable_probability", "unreachable_to_power_off_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ScenarioError(f"{name} must be in [0, 1]")
        if self.refault_probability + self.fault_to_unreachable_probability > 1.0:
            raise ScenarioError("refault and fault-to-unreachable probabilities exceed 1")
        if self.info_events_per_day < 0 or self.zombie_dwell_multiplier <= 0:
            raise ScenarioError("info_events_per_day must be >= 0, zombie multiplier > 0")

    @classmethod
    def from_dict(cls, data: Mapping) -> "FleetScenario":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**dict(data))

    def to_dict(self) -> dict:
        return asdict(self)


def load_scenario(path: Union[str, Path]) -> FleetScenario:
    with open(path, encoding="utf-8") as fh:
        return FleetScenario.from_dict(yaml.safe_load(fh) or {})


@dataclass
class TruthTimeline:
    """Ground truth for one charger: status change points and fault reports."""

    charger: str
    changes: list[tuple[int, ChargerStatus]]
    faults: list[tuple[int, str]] = field(default_factory=list)

    def status_at(self, t: int) -> ChargerStatus:
        status = S.UNKNOWN
        for at, st in self.changes:
            if at > t:
                break
            status = st
        return status


@dataclass
class Fleet:
    scenario: FleetScenario
    truth: dict[str, TruthTimeline]
    overview_csv: str
    events_csv: str
    sessions_csv: str

    @property
    def snapshot_at(self) -> int:
        return self.scenario.end

    def truth_json(self) -> str:
        doc = {
            "horizon": [self.scenario.start, self.scenario.end],
            "snapshot_at": self.snapshot_at,
            "chargers": {
                cid: {
                    "changes": [[t, s.value] for t, s in tl.changes],
                    "faults": [[t, r] for t, r in tl.faults],
                }
                for cid, tl in sorted(self.truth.items())
            },
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def load_truth(path: Union[str, Path]) -> tuple[tuple[int, int], dict[str, TruthTimeline]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    truth = {
        cid: TruthTimeline(
            cid,
            [(t, ChargerStatus(s)) for t, s in d["changes"]],
            [(t, r) for t, r in d["faults"]],
        )
        for cid, d in doc["chargers"].items()
    }
    return tuple(doc["horizon"]), truth


def _weighted(rng: random.Random, weights: Mapping[str, float]) -> str:
    names = sorted(weights)
    return rng.choices(names, weights=[weights[n] for n in names])[0]


def _simulate_charger(sc: FleetScenario, serial: str, zombie: bool, rng: random.Random):
    span = sc.end - sc.start
    mult = sc.zombie_dwell_multiplier if zombie else 1.0
    means = dict(sc.dwell_means)
    means["FAULTED"] *= mult
    means["UNREACHABLE"] *= mult
    session_rate = sc.session_rate_per_hour / 3600.0
    disrupt_rate = 1.0 / means["AVAILABLE"]

    def dwell(state: str) -> int:
        return max(1, round(rng.expovariate(1.0 / means[state])))

    changes: list[tuple[int, ChargerStatus]] = [(sc.start, S.UNKNOWN)]
    faults: list[tuple[int, str]] = []
    events: list[tuple[int, str]] = []
    sessions: list[tuple[int, int, float]] = []

    t = sc.start + 1 + int(rng.random() * sc.commission_spread * span)
    commission = t
    # Commissioning is observed through the first charging session.
    state = S.OCCUPIED
    changes.append((t, state))
    while t < sc.end:
        if state is S.OCCUPIED:
            end = t + dwell("OCCUPIED")
            energy = round(sc.power_kw * (end - t) / 3600.0 * rng.uniform(0.3, 1.0), 3)
            sessions.append((t, end, energy))
            t, state = end, S.AVAILABLE
        elif state is S.AVAILABLE:
            to_session = rng.expovariate(session_rate)
            to_disruption = rng.expovariate(disrupt_rate)
            t += max(1, round(min(to_session, to_disruption)))
            if to_session <= to_disruption:
                state = S.OCCUPIED
            else:
                state = S(_weighted(rng, sc.disruption_weights))
                if state is S.FAULTED:
                    reason = _weighted(rng, sc.fault_reasons)
                    faults.append((t, reason))
                    events.append((t, reason))
                elif state is S.UNREACHABLE:
                    events.append((t, NETWORK_LOST_EVENT))
                else:
                    events.append((t, POWER_OFF_EVENT))
        elif state is S.FAULTED:
            t += dwell("FAULTED")
            u = rng.random()
            if u < sc.refault_probability:
                reason = _weighted(rng, sc.fault_reasons)
                faults.append((t, reason))
                events.append((t, reason))
                continue  # still faulted, new cause
            if u < sc.refault_probability + sc.fault_to_unreachable_probability:
                state = S.UNREACHABLE
                events.append((t, NETWORK_LOST_EVENT))
            else:
                state = S.AVAILABLE
                events.append((t, FAULT_CLEARED_EVENT))
        elif state is S.UNREACHABLE:
            t += dwell("UNREACHABLE")
            if rng.random() < sc.unreachable_to_power_off_probability:
                state = S.UNAVAILABLE
                events.append((t, POWER_OFF_EVENT))
            else:
                state = S.AVAILABLE
                events.append((t, NETWORK_RESTORED_EVENT))
        else:  # UNAVAILABLE
            t += dwell("UNAVAILABLE")
            state = S.AVAILABLE
            events.append((t, POWER_ON_EVENT))
        changes.append((t, state))

    if sc.info_events_per_day > 0:
        rate = sc.info_events_per_day / 86400.0
        t = commission
        while True:
            t += max(1, round(rng.expovariate(rate)))
            if t >= sc.end:
                break
            events.append((t, rng.choice(INFO_EVENTS)))

    return TruthTimeline(serial, changes, faults), events, sessions


def generate_fleet(scenario: FleetScenario) -> Fleet:
    """Simulate every charger and render the three export files.

    Output is a pure function of the scenario (seeded, platform-stable RNG).
    """
    fleet_rng = random.Random(f"fleet:{scenario.seed}")
    n = scenario.charger_count
    zombies = set(fleet_rng.sample(range(n), round(scenario.zombie_fraction * n)))
    tz = timezone(timedelta(minutes=scenario.export_utc_offset_minutes))

    def iso(ts: int) -> str:
        return datetime.fromtimestamp(ts, tz=tz).isoformat()

    truth: dict[str, TruthTimeline] = {}
    overview, events, sessions = [], [], []
    for i in range(n):
        serial = f"SN{i + 1:05d}"
        rng = random.Random(f"charger:{scenario.seed}:{i}")
        tl, ev, ses = _simulate_charger(scenario, serial, i in zombies, rng)
        truth[serial] = tl
        overview.append((
            serial,
            f"{100 + i} Campus Drive, Parking Structure {i // 20 + 1}",
            f"{scenario.latitude + (i % 10) * 1e-4:.6f}",
            f"{scenario.longitude + (i // 10) * 1e-4:.6f}",
            SOURCE_STATUS_WORDS[tl.status_at(scenario.end)],
        ))
        events.extend((t, serial, name) for t, name in ev)
        sessions.extend((a, serial, b, e) for a, b, e in ses)

    def render(header: Sequence[str], rows: Iterable[Sequence]) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()

    events.sort()
    sessions.sort()
    return Fleet(
        scenario=scenario,
        truth=truth,
        overview_csv=render(("serial_number", "address", "latitude", "longitude", "status"),
                            overview),
        events_csv=render(("serial_number", "timestamp", "event_name"),
                          ((s, iso(t), name) for t, s, name in events)),
        sessions_csv=render(
            ("serial_number", "start_timestamp", "end_timestamp", "energy_kwh"),
            ((s, iso(a), iso(b), f"{e:.3f}") for a, s, b, e in sessions)),
    )


def write_fleet(fleet: Fleet, out_dir: Union[str, Path]) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "overview": (out / "overview.csv", fleet.overview_csv),
        "events": (out / "events.csv", fleet.events_csv),
        "sessions": (out / "sessions.csv", fleet.sessions_csv),
        "truth": (out / "truth.json", fleet.truth_json()),
    }
    for path, text in files.values():
        path.write_text(text, encoding="utf-8", newline="")
    return {k: p for k, (p, _) in files.items()}


# -- brute-force oracle ---------------------------------------------------------

_CODE = {s: i for i, s in enumerate(STATUSES)}


def _paint(tl: TruthTimeline, t0: int, t1: int) -> np.ndarray:
    """One status code per second of ``[t0, t1)``."""
    ticks = np.full(t1 - t0, _CODE[S.UNKNOWN], dtype=np.int8)
    changes = sorted(tl.changes, key=lambda c: c[0])
    for k, (at, status) in enumerate(changes):
        nxt = changes[k + 1][0] if k + 1 < len(changes) else t1
        a, b = max(at, t0), min(nxt, t1)
        if a < b:
            ticks[a - t0:b - t0] = _CODE[status]
    return ticks


def _tally(tl: TruthTimeline, windows: Sequence[PeriodWindow], t0: int, t1: int,
           excluded: Sequence[tuple[int, int]] = ()):
    ticks = _paint(tl, t0, t1)
    faults = sorted(tl.faults, key=lambda f: f[0])
    f_times = np.array([f[0] for f in faults], dtype=np.int64)
    names = [UNKNOWN_FAULT] + [f[1] for f in faults]
    faulted_at = np.flatnonzero(ticks == _CODE[S.FAULTED]).astype(np.int64) + t0
    # 0 = no earlier report, k = k-th report (1-based)
    cause = np.searchsorted(f_times, faulted_at, side="right")
    excused_mask = None
    if excluded:
        excused_mask = np.zeros(t1 - t0, dtype=bool)
        for a, b in excluded:
            a, b = max(a, t0), min(b, t1)
            if a < b:
                excused_mask[a - t0:b - t0] = True
        excused_mask &= np.isin(ticks, [_CODE[s] for s in DISRUPTIONS])
    out = []
    for w in windows:
        part = ticks[w.start - t0:w.end - t0]
        # count_nonzero per code is far cheaper than bincount on int8 input
        seconds = {s: int(np.count_nonzero(part == _CODE[s])) for s in STATUSES}
        lo, hi = np.searchsorted(faulted_at, [w.start, w.end])
        by_reason: dict[str, int] = {}
        if hi > lo:
            per = np.bincount(cause[lo:hi], minlength=len(names))
            for k in np.flatnonzero(per):
                by_reason[names[k]] = by_reason.get(names[k], 0) + int(per[k])
        excused = 0
        if excused_mask is not None:
            excused = int(np.count_nonzero(excused_mask[w.start - t0:w.end - t0]))
        out.append((StateDurations(tl.charger, w, seconds),
                    FaultReasonDurations(tl.charger, w, by_reason), excused))
    return out


def _oracle_row(d: StateDurations, r: FaultReasonDurations, excused: int,
                policy: UptimePolicy) -> MetricsRow:
    total = d.window.duration_seconds
    sec = d.seconds_by_state
    up = sec[S.OCCUPIED] + sec[S.AVAILABLE] + excused
    denominator = total
    if policy.unknown_policy is UnknownPolicy.COUNT_AS_UP:
        up += sec[S.UNKNOWN]
    elif policy.unknown_policy is UnknownPolicy.EXCLUDE_FROM_DENOMINATOR:
        denominator -= sec[S.UNKNOWN]
    faulted = sum(r.seconds_by_reason.values())
    return MetricsRow(
        charger=d.charger,
        window=d.window,
        uptime_pct=up * 100 / denominator if denominator else None,
        fault_time_pct=sec[S.FAULTED] * 100 / total,
        unreachable_time_pct=sec[S.UNREACHABLE] * 100 / total,
        unavailable_time_pct=sec[S.UNAVAILABLE] * 100 / total,
        unknown_time_pct=sec[S.UNKNOWN] * 100 / total,
        fault_reason_pct={k: v * 100 / faulted for k, v in sorted(r.seconds_by_reason.items())}
        if faulted else {},
    )


def oracle_run(
    truth: Mapping[str, TruthTimeline],
    windows: Sequence[PeriodWindow],
    policy: Optional[UptimePolicy] = None,
) -> tuple[dict[str, list[tuple[StateDurations, FaultReasonDurations]]], list[MetricsRow]]:
    """Per-second tallies and the metric rows derived from them, in one pass."""
    policy = policy or UptimePolicy()
    if not windows:
        return {cid: [] for cid in truth}, []
    t0, t1 = min(w.start for w in windows), max(w.end for w in windows)
    durations: dict[str, list[tuple[StateDurations, FaultReasonDurations]]] = {}
    rows: list[MetricsRow] = []
    for cid, tl in sorted(truth.items()):
        spans = policy.excluded_intervals.get(cid, ())
        tallies = _tally(tl, windows, t0, t1, spans)
        durations[cid] = [(d, r) for d, r, _ in tallies]
        rows.extend(_oracle_row(d, r, excused, policy) for d, r, excused in tallies)
    return durations, rows


def oracle_durations(
    truth: Mapping[str, TruthTimeline],
    windows: Sequence[PeriodWindow],
) -> dict[str, list[tuple[StateDurations, FaultReasonDurations]]]:
    """Per-second tally of state and fault cause for every charger and window."""
    return oracle_run(truth, windows)[0]


def oracle_metrics(
    truth: Mapping[str, TruthTimeline],
    windows: Sequence[PeriodWindow],
    policy: Optional[UptimePolicy] = None,
) -> list[MetricsRow]:
    """Metric rows straight from per-second truth tallies."""
    return oracle_run(truth, windows, policy)[1]
