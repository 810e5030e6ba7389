from __future__ import annotations

import json
import logging
from pathlib import Path

import pytest
import yaml
from filelock import FileLock

from chargerel.cli import EXIT_CONFIG, EXIT_IO, EXIT_LOCKED, EXIT_OK, EXIT_PARTIAL, main
from chargerel.modelstore import ModelStore
from chargerel.rawstore import RawStore

SCENARIO = {"seed": 7, "charger_count": 4, "start": "2024-01-01T00:00:00Z",
            "end": "2024-03-01T00:00:00Z", "zombie_fraction": 0.25}


@pytest.fixture
def env(tmp_path):
    scen = tmp_path / "scenario.yaml"
    scen.write_text(yaml.safe_dump(SCENARIO))
    cfg = tmp_path / "chargerel.yaml"
    cfg.write_text(yaml.safe_dump({
        "store_path": "store/raw.sqlite",
        "sources": [{"name": "export", "inputs": ["export/overview.csv", "export/events.csv",
                                                  "export/sessions.csv"]}],
        "report": {"out_dir": "reports"},
    }))
    return tmp_path, ["--config", str(cfg)]


def run(args, capsys) -> tuple[int, list[dict]]:
    code = main(args)
    out = capsys.readouterr().out
    lines = [json.loads(x) for x in out.splitlines() if x.startswith("{")]
    return code, lines


def populate(env, capsys):
    root, cfg = env
    assert run(["simulate", str(root / "scenario.yaml"), "--out", str(root / "export")], capsys)[0] == 0
    assert run(cfg + ["ingest", "--extracted-at", "2024-03-01T00:00:00Z"], capsys)[0] == 0
    assert run(cfg + ["normalize"], capsys)[0] == 0


def test_ingest_counts_match_files(env, capsys):
    root, cfg = env
    run(["simulate", str(root / "scenario.yaml"), "--out", str(root / "export")], capsys)
    code, (summary,) = run(cfg + ["ingest", "--extracted-at", "2024-03-01T00:00:00Z"], capsys)
    files = [root / "export" / f for f in ("overview.csv", "events.csv", "sessions.csv")]
    n_over, n_ev, n_ses = (len(f.read_text().splitlines()) - 1 for f in files)
    assert code == EXIT_OK
    assert summary["rows_read"] == n_over + n_ev + n_ses
    assert summary["items_stored"] == 1 + n_ev + 3 * n_ses
    assert summary["rows_rejected"] == 0


def test_reingest_stores_duplicates_but_normalizes_once(env, capsys):
    root, cfg = env
    populate(env, capsys)
    code, (summary,) = run(cfg + ["ingest", "--extracted-at", "2024-03-01T00:00:00Z"], capsys)
    with RawStore(root / "store" / "raw.sqlite") as raw:
        assert raw.count() == 2 * summary["items_stored"]
    code, (norm,) = run(cfg + ["normalize"], capsys)
    assert code == EXIT_OK and norm["processed"] == 0 and norm["duplicates"] == summary["items_stored"]


def test_bad_input_path(env, capsys):
    root, cfg = env
    assert run(cfg + ["ingest", str(root / "nope.csv")], capsys)[0] == EXIT_IO
    assert not (root / "store" / "raw.sqlite").exists()


def test_missing_config(tmp_path, capsys):
    assert run(["--config", str(tmp_path / "none.yaml"), "normalize"], capsys)[0] == EXIT_CONFIG


def test_empty_queue(env, capsys):
    _, cfg = env
    code, (summary,) = run(cfg + ["normalize"], capsys)
    assert code == EXIT_OK and summary["processed"] == 0


def test_partial_normalization(env, capsys):
    root, cfg = env
    populate(env, capsys)
    with RawStore(root / "store" / "raw.sqlite") as raw:
        raw._conn.execute(
            "INSERT INTO raw_items (extracted_at, processed, item_type, event_at, payload) "
            "VALUES (0, 0, 'ChargerEvent', 0, '{\"at\": 0}')")
        raw._conn.commit()
    code, (summary,) = run(cfg + ["normalize"], capsys)
    assert code == EXIT_PARTIAL and summary["quarantined"] == 1


def test_compute_window_counts(env, capsys):
    _, cfg = env
    populate(env, capsys)
    code, (s,) = run(cfg + ["compute", "--granularity", "daily", "--start", "2024-01-01",
                            "--end", "2025-01-01"], capsys)
    assert code == EXIT_OK and s["windows"] == 366 and s["rows"] == 366 * 4
    code, (s,) = run(cfg + ["compute", "--granularity", "yearly", "--start", "2018-01-01",
                            "--end", "2025-01-01"], capsys)
    assert s["windows"] == 7 and s["rows"] == 7 * 4


def test_compute_on_empty_model_warns(env, capsys, caplog):
    _, cfg = env
    with caplog.at_level(logging.WARNING):
        code, (s,) = run(cfg + ["compute", "--granularity", "monthly", "--start", "2024-01-01",
                                "--end", "2024-02-01"], capsys)
    assert code == EXIT_OK and s["rows"] == 0
    assert "empty" in caplog.text


@pytest.mark.parametrize("view,fmt", [("site", "csv"), ("site", "json"), ("chargers", "csv"),
                                      ("stacked_states", "csv"), ("reason_allocation", "json")])
def test_report_views(env, capsys, view, fmt):
    root, cfg = env
    populate(env, capsys)
    run(cfg + ["compute", "--granularity", "monthly", "--start", "2024-01-01",
               "--end", "2024-03-01"], capsys)
    code, _ = run(cfg + ["report", "--granularity", "monthly", "--view", view, "--format", fmt], capsys)
    out = root / "reports" / f"monthly_{view}.{fmt}"
    assert code == EXIT_OK and out.exists() and out.stat().st_size > 0
    if fmt == "json":
        json.loads(out.read_text())


def test_report_before_compute(env, capsys):
    _, cfg = env
    populate(env, capsys)
    assert run(cfg + ["report", "--granularity", "daily"], capsys)[0] == EXIT_IO


def test_lock_busy(env, capsys):
    root, cfg = env
    (root / "store").mkdir()
    with FileLock(str(root / "store" / "raw.sqlite") + ".lock"):
        assert run(cfg + ["normalize"], capsys)[0] == EXIT_LOCKED


def test_reset_processed_rebuilds(env, capsys):
    root, cfg = env
    populate(env, capsys)
    with ModelStore(root / "store" / "raw.model.sqlite") as m:
        before = m.samples()
    code, (s,) = run(cfg + ["reset-processed"], capsys)
    assert code == EXIT_OK and s["requeued"] > 0 and s["model_cleared"]
    code, (n,) = run(cfg + ["normalize"], capsys)
    assert n["processed"] == s["requeued"]
    with ModelStore(root / "store" / "raw.model.sqlite") as m:
        assert m.samples() == before


def test_validate_command(env, capsys, tmp_path):
    unknown = tmp_path / "unknown.csv"
    unknown.write_text("serial_number,timestamp\nSN1,2024-01-01T00:00:00Z\n")
    short = tmp_path / "sessions.csv"
    short.write_text("serial_number,start_timestamp,end_timestamp\nSN1,2024-01-01T00:00:00Z,"
                     "2024-01-01T01:00:00Z\n")
    code, (r1, r2) = run(["validate", str(unknown), str(short)], capsys)
    assert code == EXIT_PARTIAL
    assert r1["kind"] is None and r1["violations"]
    assert r2["kind"] == "sessions" and r2["missing_columns"] == ["energy_kwh"]


def test_validate_simulated_exports_clean(env, capsys):
    root, _ = env
    run(["simulate", str(root / "scenario.yaml"), "--out", str(root / "export")], capsys)
    files = sorted(str(p) for p in (root / "export").glob("*.csv") if p.name != "truth.csv")
    code, reports = run(["validate", *files], capsys)
    assert code == EXIT_OK and all(not r["violations"] for r in reports)


def test_simulate_seed_override(env, capsys):
    root, _ = env
    code, (s,) = run(["simulate", str(root / "scenario.yaml"), "--out", str(root / "x"),
                      "--seed", "99"], capsys)
    assert code == EXIT_OK and s["seed"] == 99 and Path(s["files"]["truth"]).exists()


def test_bad_scenario_is_config_error(tmp_path, capsys):
    scen = tmp_path / "s.yaml"
    scen.write_text("charger_count: 0\n")
    assert run(["simulate", str(scen), "--out", str(tmp_path / "o")], capsys)[0] == EXIT_CONFIG


def test_report_dash_writes_stdout(env, capsys):
    root, cfg = env
    populate(env, capsys)
    run(cfg + ["compute", "--granularity", "yearly", "--start", "2024-01-01",
               "--end", "2025-01-01"], capsys)
    assert main(cfg + ["report", "--granularity", "yearly", "--out", "-"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("window_label,chargers_active,uptime_pct")
    assert not (root / "reports").exists()
