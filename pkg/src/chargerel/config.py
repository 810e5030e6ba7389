"""YAML deployment configuration."""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from chargerel.adapter_export import AdapterDescriptor
from chargerel.metrics import UnknownPolicy, UptimePolicy
from chargerel.report import DEFAULT_DECOMMISSION_DAYS
from chargerel.statemachine import DEFAULT_RULES, ClassificationRules
from chargerel.timeline import ConfigurationError, get_zone

ADAPTERS = {"export_csv": AdapterDescriptor}


@dataclass
class SourceConfig:
    name: str
    adapter: str = "export_csv"
    settings: dict[str, str] = field(default_factory=dict)
    inputs: list[Path] = field(default_factory=list)

    def descriptor(self) -> AdapterDescriptor:
        return ADAPTERS[self.adapter](name=self.name, settings=dict(self.settings))


@dataclass
class Config:
    store_path: Path
    model_path: Path
    sources: list[SourceConfig] = field(default_factory=list)
    event_rules: ClassificationRules = DEFAULT_RULES
    site_timezone: str = "UTC"
    policy: UptimePolicy = field(default_factory=UptimePolicy)
    decommission_days: int = DEFAULT_DECOMMISSION_DAYS
    report_dir: Optional[Path] = None
    schedule: dict[str, Any] = field(default_factory=dict)  # informational only

    def source(self, name: Optional[str] = None) -> SourceConfig:
        if not self.sources:
            return SourceConfig(name="export_csv")
        if name is None:
            return self.sources[0]
        for s in self.sources:
            if s.name == name:
                return s
        raise ConfigurationError(f"no source named {name!r}")


def _instant(value: Any, zone) -> int:
    if isinstance(value, (int, float)):
        return int(value)
    dt = value if isinstance(value, datetime) else datetime.fromisoformat(
        str(value).replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=zone)
    return int(dt.timestamp())


def parse_config(data: dict, base_dir: Union[str, Path] = ".") -> Config:
    base = Path(base_dir)

    def resolve(p: Union[str, Path]) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping")
    if "store_path" not in data:
        raise ConfigurationError("config needs store_path")
    store = resolve(data["store_path"])
    model = resolve(data["model_path"]) if data.get("model_path") else \
        store.with_name(store.stem + ".model.sqlite")

    tz_name = str(data.get("site_timezone", "UTC"))
    zone = get_zone(tz_name)

    sources = []
    for entry in data.get("sources") or []:
        adapter = entry.get("adapter", "export_csv")
        if adapter not in ADAPTERS:
            raise ConfigurationError(f"unknown adapter {adapter!r}")
        sources.append(SourceConfig(
            name=str(entry.get("name", adapter)),
            adapter=adapter,
            settings={str(k): str(v) for k, v in (entry.get("settings") or {}).items()},
            inputs=[resolve(p) for p in entry.get("inputs") or []],
        ))

    rules = DEFAULT_RULES
    if data.get("event_rules") is not None:
        try:
            rules = ClassificationRules.from_config(data["event_rules"])
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"bad event_rules: {exc}") from exc

    pol = data.get("uptime_policy") or {}
    try:
        policy = UptimePolicy(
            unknown_policy=UnknownPolicy(str(pol.get("unknown", "not_up")).lower()),
            excluded_intervals={
                str(c): [(_instant(a, zone), _instant(b, zone)) for a, b in spans]
                for c, spans in (pol.get("excluded_intervals") or {}).items()
            },
        )
    except ValueError as exc:
        raise ConfigurationError(f"bad uptime_policy: {exc}") from exc

    rep = data.get("report") or {}
    return Config(
        store_path=store,
        model_path=model,
        sources=sources,
        event_rules=rules,
        site_timezone=tz_name,
        policy=policy,
        decommission_days=int(rep.get("decommission_days", DEFAULT_DECOMMISSION_DAYS)),
        report_dir=resolve(rep["out_dir"]) if rep.get("out_dir") else None,
        schedule=dict(data.get("schedule") or {}),
    )


def load_config(path: Union[str, Path]) -> Config:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML in {path}: {exc}") from exc
    return parse_config(data or {}, path.parent)
