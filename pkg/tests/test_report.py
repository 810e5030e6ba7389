from __future__ import annotations

import csv
import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chargerel.model import ChargerStatus, MetricsRow, PeriodWindow, StatusSample
from chargerel.modelstore import ChargerHistory
from chargerel.report import (
    PERCENT_FIELDS,
    ActivityRule,
    ReportError,
    View,
    export_report,
    load_site_reports_json,
    plot_data,
    site_average,
    site_reports,
)

S = ChargerStatus
DAY = 86400
W = PeriodWindow(0, DAY, "2024-01-01")


def row(charger, up, fault=0.0, unreach=0.0, unavail=0.0, unknown=None, reasons=None, window=W):
    if unknown is None:
        unknown = 100.0 - up - fault - unreach - unavail
    return MetricsRow(charger, window, up, fault, unreach, unavail, unknown, reasons or {})


def test_mean_of_two():
    assert site_average([row("a", 80.0), row("b", 90.0)]).mean_uptime_pct == 85.0


def test_all_up_has_no_reasons():
    rep = site_average([row("a", 100.0), row("b", 100.0)])
    assert rep.mean_uptime_pct == 100.0 and rep.reason_allocation_pct == {}


def test_charger_without_samples_is_inactive():
    rule = ActivityRule.from_model({
        "a": ChargerHistory([StatusSample("a", 0, S.AVAILABLE)], []),
        "ghost": ChargerHistory([], []),
    })
    rep = site_average([row("a", 100.0), row("ghost", 0.0, unknown=100.0)], rule)
    assert rep.chargers_active == 1 and rep.mean_uptime_pct == 100.0


def test_zero_active_is_undefined():
    rep = site_average([row("ghost", 0.0, unknown=100.0)])
    assert not rep.defined and rep.mean_uptime_pct is None


def test_reason_allocation_is_duration_weighted():
    rows = [row("a", 90.0, fault=10.0, reasons={"A": 100.0}),
            row("b", 70.0, fault=30.0, reasons={"B": 50.0, "C": 50.0})]
    alloc = site_average(rows).reason_allocation_pct
    assert alloc == pytest.approx({"A": 25.0, "B": 37.5, "C": 37.5}, abs=1e-12)


def test_rows_must_share_window():
    with pytest.raises(ReportError):
        site_average([row("a", 1.0), row("b", 1.0, window=PeriodWindow(DAY, 2 * DAY))])


def test_decommissioned_after_absence():
    hist = {"old": ChargerHistory([StatusSample("old", 0, S.AVAILABLE)], []),
            "new": ChargerHistory([StatusSample("new", 0, S.AVAILABLE)], [])}
    snapshots = [DAY, 200 * DAY]
    presence = {"old": [DAY], "new": [DAY, 200 * DAY]}
    rule = ActivityRule.from_model(hist, snapshots, presence, decommission_days=90)
    late = PeriodWindow(150 * DAY, 151 * DAY)
    assert rule("new", late) and not rule("old", late)
    assert rule("old", PeriodWindow(50 * DAY, 51 * DAY))


def test_not_decommissioned_without_later_snapshot():
    hist = {"a": ChargerHistory([StatusSample("a", 0, S.AVAILABLE)], [])}
    rule = ActivityRule.from_model(hist, [DAY], {"a": [DAY]}, 90)
    assert rule("a", PeriodWindow(500 * DAY, 501 * DAY))


def test_csv_shape_and_format(tmp_path):
    rep = site_average([row("a", 88.88, fault=11.12, reasons={"Hardware Fault": 100.0})])
    path = export_report([rep], "csv", tmp_path / "r.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ("window_label,chargers_active,uptime_pct,fault_time_pct,unreachable_time_pct,"
                        "unavailable_time_pct,unknown_time_pct,reason:Hardware Fault")
    assert lines[1] == "2024-01-01,1,88.9,11.1,0.0,0.0,0.0,100.0"
    assert len(lines) == 2


def test_export_is_deterministic(tmp_path):
    reps = site_reports([row("b", 50.0, fault=50.0, reasons={"x": 60.0, "y": 40.0}), row("a", 100.0)])
    a = export_report(reps, "json", tmp_path / "a.json").read_bytes()
    b = export_report(reps, "json", tmp_path / "b.json").read_bytes()
    assert a == b


def test_json_round_trip(tmp_path):
    reps = site_reports([row("a", 33.3333333333, fault=66.6666666667, reasons={"x": 100.0})],
                        policy={"unknown_policy": "not_up"})
    path = export_report(reps, "json", tmp_path / "r.json")
    doc = json.loads(path.read_text())
    assert doc["metadata"]["aggregation"]["reason_allocation"].startswith("duration-weighted")
    assert load_site_reports_json(path) == reps


def test_csv_round_trip_to_one_decimal(tmp_path):
    reps = site_reports([row("a", 12.345, fault=87.655)])
    text = export_report(reps, "csv", tmp_path / "r.csv").read_text()
    (parsed,) = list(csv.DictReader(io.StringIO(text)))
    assert float(parsed["uptime_pct"]) == round(reps[0].mean_uptime_pct, 1)


def test_export_errors(tmp_path):
    with pytest.raises(ReportError):
        export_report([], "csv", tmp_path / "x.csv")
    with pytest.raises(ReportError):
        export_report(site_reports([row("a", 100.0)]), "xml", tmp_path / "x.xml")
    with pytest.raises(OSError):
        export_report(site_reports([row("a", 100.0)]), "csv", tmp_path / "missing" / "x.csv")


def test_stacked_states_shape():
    years = [PeriodWindow(i * DAY, (i + 1) * DAY, str(2018 + i)) for i in range(7)]
    reps = site_reports([row("a", 90.0, fault=10.0, window=w) for w in years])
    data = plot_data(reps, View.STACKED_STATES)
    assert len(data) == 35
    assert {s for _, s, _ in data} == {"uptime", "fault_time", "unreachable_time",
                                       "unavailable_time", "unknown_time"}


def test_reason_allocation_shape():
    months = [PeriodWindow(i * DAY, (i + 1) * DAY, f"2024-{i + 1:02d}") for i in range(12)]
    reasons = {"A": 40.0, "B": 30.0, "C": 20.0, "D": 10.0}
    reps = site_reports([row("a", 90.0, fault=10.0, reasons=reasons, window=w) for w in months])
    data = plot_data(reps, "reason_allocation")
    assert len(data) <= 48
    for w in months:
        assert sum(v for label, _, v in data if label == w.label) == pytest.approx(100.0, abs=1e-9)


def test_empty_reason_data():
    assert plot_data(site_reports([row("a", 100.0)]), "reason_allocation") == []


@settings(max_examples=100)
@given(st.floats(0, 100), st.integers(1, 20))
def test_mean_of_constant(value, n):
    rep = site_average([row(f"c{i}", value, unknown=100.0 - value) for i in range(n)],
                       activity=lambda c, w: True)
    assert rep.mean_uptime_pct == pytest.approx(value, abs=1e-9)
    assert rep.chargers_active == n


def test_percent_fields_match_csv_schema():
    assert PERCENT_FIELDS == ("uptime_pct", "fault_time_pct", "unreachable_time_pct",
                              "unavailable_time_pct", "unknown_time_pct")
