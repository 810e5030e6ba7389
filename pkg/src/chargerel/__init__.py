"""Charger reliability analytics: ingest telemetry exports, rebuild status
timelines and compute uptime, fault, fault-reason and unreachable metrics."""

from chargerel.model import (
    ChargerMetadata,
    ChargerStatus,
    ChargingSession,
    FaultReasonDurations,
    FaultRecord,
    MetricsRow,
    PeriodWindow,
    StateDurations,
    StatusSample,
)

__version__ = "0.1.0"

__all__ = [
    "ChargerMetadata",
    "ChargerStatus",
    "ChargingSession",
    "FaultReasonDurations",
    "FaultRecord",
    "MetricsRow",
    "PeriodWindow",
    "StateDurations",
    "StatusSample",
]
