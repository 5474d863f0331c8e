"""Scenario files, experiment runs, sweeps and metric output."""

from weavesim.orchestrator.emit import COLUMNS, IoError, emit, parse_csv, parse_jsonl, sweep_csv, to_csv, to_jsonl
from weavesim.orchestrator.experiments import (
    UNITS,
    MetricRecord,
    RunError,
    RunReport,
    SweepPoint,
    UnknownParameter,
    beacons,
    run,
    run_all,
    sweep,
)
from weavesim.orchestrator.scenario import (
    SCHEMA,
    CrossRefError,
    RangeError,
    Scenario,
    ScenarioError,
    ScenarioSyntaxError,
    UnknownKey,
    default_scenario,
    load_scenario,
    parse_scenario,
    serialize,
)

__all__ = [
    "COLUMNS",
    "SCHEMA",
    "UNITS",
    "CrossRefError",
    "IoError",
    "MetricRecord",
    "RangeError",
    "RunError",
    "RunReport",
    "Scenario",
    "ScenarioError",
    "ScenarioSyntaxError",
    "SweepPoint",
    "UnknownKey",
    "UnknownParameter",
    "beacons",
    "default_scenario",
    "emit",
    "load_scenario",
    "parse_csv",
    "parse_jsonl",
    "parse_scenario",
    "run",
    "run_all",
    "serialize",
    "sweep",
    "sweep_csv",
    "to_csv",
    "to_jsonl",
]
