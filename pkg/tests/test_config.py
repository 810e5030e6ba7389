from __future__ import annotations

from pathlib import Path

import pytest

from chargerel.config import load_config, parse_config
from chargerel.metrics import UnknownPolicy
from chargerel.statemachine import EventCategory, classify_event
from chargerel.timeline import ConfigurationError

ROOT = Path(__file__).resolve().parents[1]


def test_minimal(tmp_path):
    cfg = parse_config({"store_path": "data/raw.sqlite"}, tmp_path)
    assert cfg.store_path == tmp_path / "data" / "raw.sqlite"
    assert cfg.model_path == tmp_path / "data" / "raw.model.sqlite"
    assert cfg.site_timezone == "UTC" and cfg.decommission_days == 90
    assert cfg.source().name == "export_csv"


def test_full(tmp_path):
    cfg = parse_config({
        "store_path": "/abs/raw.sqlite",
        "site_timezone": "America/Los_Angeles",
        "sources": [{"name": "dash", "adapter": "export_csv", "inputs": ["a.csv"],
                     "settings": {"manufacturer": "acme"}}],
        "event_rules": [{"pattern": "oops", "category": "fault"}],
        "uptime_policy": {"unknown": "exclude_from_denominator",
                          "excluded_intervals": {"SN1": [["2024-01-01", "2024-01-02"]]}},
        "report": {"decommission_days": 30, "out_dir": "reports"},
        "schedule": {"extract": "hourly"},
    }, tmp_path)
    assert cfg.store_path == Path("/abs/raw.sqlite")
    assert cfg.source("dash").inputs == [tmp_path / "a.csv"]
    assert cfg.source("dash").descriptor().settings == {"manufacturer": "acme"}
    assert classify_event("Oops!", cfg.event_rules) is EventCategory.FAULT
    assert cfg.policy.unknown_policy is UnknownPolicy.EXCLUDE_FROM_DENOMINATOR
    # naive dates are site-local midnight (PST, UTC-8)
    assert cfg.policy.excluded_intervals["SN1"] == ((1704096000, 1704182400),)
    assert cfg.report_dir == tmp_path / "reports" and cfg.decommission_days == 30


@pytest.mark.parametrize("data", [
    {},
    {"store_path": "x", "site_timezone": "Nowhere/Town"},
    {"store_path": "x", "sources": [{"adapter": "scraper"}]},
    {"store_path": "x", "event_rules": [{"pattern": "x", "category": "bogus"}]},
    {"store_path": "x", "uptime_policy": {"unknown": "maybe"}},
    {"store_path": "x", "uptime_policy": {"excluded_intervals": {"a": [[5, 1]]}}},
])
def test_invalid(tmp_path, data):
    with pytest.raises(ConfigurationError):
        parse_config(data, tmp_path)


def test_unknown_source_name(tmp_path):
    cfg = parse_config({"store_path": "x", "sources": [{"name": "a"}]}, tmp_path)
    with pytest.raises(ConfigurationError):
        cfg.source("b")


def test_load_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("store_path: [unclosed\n")
    with pytest.raises(ConfigurationError):
        load_config(bad)


def test_shipped_config_loads():
    cfg = load_config(ROOT / "configs" / "case_study.yaml")
    assert cfg.site_timezone == "America/Los_Angeles"
    assert len(cfg.source().inputs) == 3
