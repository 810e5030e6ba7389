from __future__ import annotations

import pytest

from chargerel.adapter_export import (
    AdapterDescriptor,
    ExportFormatError,
    extract,
    format_timestamp,
    map_source_status,
    parse_timestamp,
    validate_export,
)
from chargerel.model import ChargerStatus
from chargerel.rawstore import ItemType

S = ChargerStatus
OVERVIEW_HEADER = "serial_number,address,latitude,longitude,status\n"


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def overview98(tmp_path):
    rows = "".join(f"SN{i:05d},Lot {i},37.4,-122.1,Available\n" for i in range(98))
    return write(tmp_path / "overview.csv", OVERVIEW_HEADER + rows)


@pytest.fixture
def events3(tmp_path):
    return write(tmp_path / "events.csv", "serial_number,timestamp,event_name\n"
                 "SN1,2024-01-01T00:00:00Z,Tamper Detect\n"
                 "SN1,2024-01-01T01:00:00+00:00,Fault Cleared\n"
                 "SN2,2023-12-31T16:00:00-08:00,Power Off\n")


@pytest.fixture
def sessions2(tmp_path):
    return write(tmp_path / "sessions.csv", "serial_number,start_timestamp,end_timestamp,energy_kwh\n"
                 "SN1,2024-01-01T02:00:00Z,2024-01-01T04:00:00Z,12.0\n"
                 "SN2,2024-01-02T02:00:00Z,2024-01-02T03:00:00Z,6.0\n")


def test_overview_becomes_one_item(overview98):
    items = extract(AdapterDescriptor(), [overview98], extracted_at=1_700_000_000).items
    assert len(items) == 1
    assert items[0].item_type is ItemType.StationOverview
    assert len(items[0].payload["rows"]) == 98
    assert items[0].extracted_at == 1_700_000_000


def test_one_item_per_event_row(events3):
    items = extract(AdapterDescriptor(), [events3], extracted_at=0).items
    assert [i.item_type for i in items] == [ItemType.ChargerEvent] * 3
    # offsets are converted to UTC
    assert items[0].payload["at"] == items[2].payload["at"] == 1704067200


def test_three_items_per_session_row(sessions2):
    items = extract(AdapterDescriptor(), [sessions2], extracted_at=0).items
    kinds = [i.item_type for i in items]
    assert len(items) == 6
    assert kinds.count(ItemType.ChargingSession) == 2
    assert kinds.count(ItemType.ChargingSessionStart) == 2
    assert kinds.count(ItemType.ChargingSessionEnd) == 2


def test_no_column_is_dropped(tmp_path):
    path = write(tmp_path / "events.csv", "serial_number,timestamp,event_name,extra\n"
                 "SN1,2024-01-01T00:00:00Z,Heartbeat,kept\n")
    (item,) = extract(AdapterDescriptor(), [path], extracted_at=0).items
    assert item.payload["extra"] == "kept"


def test_extraction_is_pure(events3, sessions2):
    a = extract(AdapterDescriptor(), [events3, sessions2], extracted_at=5).items
    b = extract(AdapterDescriptor(), [events3, sessions2], extracted_at=5).items
    assert a == b


def test_bad_rows_rejected_and_extraction_continues(tmp_path):
    path = write(tmp_path / "sessions.csv",
                 "serial_number,start_timestamp,end_timestamp,energy_kwh\n"
                 "SN1,2024-01-01T02:00:00Z,2024-01-01T01:00:00Z,1.0\n"
                 "SN1,2024-01-01T02:00:00Z,2024-01-01T03:00:00Z,1.0\n")
    ext = extract(AdapterDescriptor(), [path], extracted_at=0)
    assert len(ext.items) == 3
    assert [(v.line, v.message) for _, v in ext.rejected] == [(2, "negative session duration")]


def test_missing_column_is_file_level_error(tmp_path):
    path = write(tmp_path / "events.csv", "timestamp,event_name\n2024-01-01T00:00:00Z,X\n")
    with pytest.raises(ExportFormatError, match="serial_number"):
        extract(AdapterDescriptor(), [path], extracted_at=0)


def test_validate_well_formed(events3):
    report = validate_export(events3)
    assert report.ok and report.row_count == 3 and report.violations == []


def test_validate_names_missing_column(tmp_path):
    path = write(tmp_path / "o.csv", "address,latitude,longitude,status\nx,1,1,Available\n")
    report = validate_export(path, expected="overview")
    assert report.missing_columns == ["serial_number"]
    assert not report.ok


def test_validate_negative_duration(tmp_path):
    path = write(tmp_path / "s.csv", "serial_number,start_timestamp,end_timestamp,energy_kwh\n"
                 "SN1,2024-01-01T02:00:00Z,2024-01-01T01:00:00Z,1.0\n")
    report = validate_export(path)
    assert [v.message for v in report.violations] == ["negative session duration"]


def test_validate_coordinates(tmp_path):
    path = write(tmp_path / "o.csv", OVERVIEW_HEADER + "SN1,x,91,0,Available\n")
    assert "latitude" in validate_export(path).violations[0].message


def test_validate_unreadable_file(tmp_path):
    with pytest.raises(OSError):
        validate_export(tmp_path / "missing.csv")


def test_status_mapping():
    assert map_source_status("AVAILABLE") is S.AVAILABLE
    assert map_source_status(" In Use ") is S.OCCUPIED
    assert map_source_status("Offline") is S.UNREACHABLE


def test_unrecognized_status_logged(caplog):
    assert map_source_status("Gremlins") is S.UNKNOWN
    assert "Gremlins" in caplog.text


def test_timestamps():
    assert parse_timestamp("2024-01-01T00:00:00Z") == 1704067200
    assert parse_timestamp("2024-01-01T00:00:00.900+00:00") == 1704067200
    assert format_timestamp(1704067200).startswith("2024-01-01T00:00:00")
    with pytest.raises(ValueError):
        parse_timestamp("2024-01-01T00:00:00")  # no offset


def test_descriptor_needs_item_types():
    with pytest.raises(ValueError):
        AdapterDescriptor(supported_item_types=frozenset())
