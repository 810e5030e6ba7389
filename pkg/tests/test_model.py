from __future__ import annotations

from datetime import date

import pytest

from chargerel.model import (
    STATUSES,
    ChargerMetadata,
    ChargerStatus,
    ChargingSession,
    FaultReasonDurations,
    FaultRecord,
    PeriodWindow,
    StateDurations,
    StatusSample,
)

S = ChargerStatus


def test_exactly_six_statuses():
    assert {s.value for s in STATUSES} == {
        "OCCUPIED", "AVAILABLE", "UNAVAILABLE", "FAULTED", "UNREACHABLE", "UNKNOWN"}


def test_up_is_occupied_or_available():
    assert {s for s in STATUSES if s.is_up} == {S.OCCUPIED, S.AVAILABLE}


def test_metadata_validation():
    ChargerMetadata("SN1", "acme", "SN1", power_rating_kw=6.0, install_date=date(2020, 1, 1))
    with pytest.raises(ValueError):
        ChargerMetadata("SN1", "acme", "")
    with pytest.raises(ValueError):
        ChargerMetadata("SN1", "acme", "SN1", power_rating_kw=-1)
    with pytest.raises(ValueError):
        ChargerMetadata("", "acme", "SN1")


def test_timestamps_must_be_nonnegative_ints():
    with pytest.raises(ValueError):
        StatusSample("X", -1, S.AVAILABLE)
    with pytest.raises(ValueError):
        StatusSample("X", 1.5, S.AVAILABLE)  # type: ignore[arg-type]


def test_fault_reason_kept_verbatim():
    assert FaultRecord("X", 5, "  Tamper Detect ").reason == "  Tamper Detect "
    with pytest.raises(ValueError):
        FaultRecord("X", 5, "")


def test_session_invariants():
    ChargingSession("X", 10, 10, 0.0)
    with pytest.raises(ValueError, match="negative session duration"):
        ChargingSession("X", 10, 9, 1.0)
    with pytest.raises(ValueError):
        ChargingSession("X", 1, 9, -1.0)


def test_window_ordering_and_length():
    w = PeriodWindow(100, 200, "a")
    assert w.duration_seconds == 100
    assert w == PeriodWindow(100, 200, "other label")
    with pytest.raises(ValueError):
        PeriodWindow(5, 5)


def test_state_durations_fill_and_conserve():
    w = PeriodWindow(0, 100)
    d = StateDurations("X", w, {S.AVAILABLE: 60, S.FAULTED: 40})
    assert d[S.UNKNOWN] == 0 and set(d.seconds_by_state) == set(STATUSES)
    with pytest.raises(ValueError):
        StateDurations("X", w, {S.AVAILABLE: 60})
    with pytest.raises(ValueError):
        StateDurations("X", w, {S.AVAILABLE: 110, S.FAULTED: -10})


def test_fault_reason_total():
    r = FaultReasonDurations("X", PeriodWindow(0, 10), {"a": 3, "b": 4})
    assert r.faulted_seconds == 7


def test_values_are_immutable():
    s = StatusSample("X", 1, S.AVAILABLE)
    with pytest.raises(AttributeError):
        s.at = 2  # type: ignore[misc]
