"""Flat-file metric tables (CSV and JSON Lines) with byte-stable output."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path
from typing import Iterable, Sequence

from weavesim.errors import WeaveError
from weavesim.orchestrator.experiments import MetricRecord, RunReport, SweepPoint

COLUMNS = ("run_id", "seed", "experiment", "metric", "value", "unit", "sim_time_ps")
SWEEP_COLUMNS = ("param", "param_value") + COLUMNS
OUT_ENV = "WEAVESIM_OUT"


class IoError(WeaveError):
    pass


def _row(r: MetricRecord) -> dict:
    return {
        "run_id": r.run_id,
        "seed": r.seed,
        "experiment": r.experiment,
        "metric": r.metric,
        "value": r.value,
        "unit": r.unit,
        "sim_time_ps": r.sim_time_ps,
    }


def _cell(v) -> str:
    # repr keeps every float bit; csv would otherwise use str()
    return repr(v) if isinstance(v, float) else str(v)


def records_of(reports: Iterable[RunReport]) -> list[MetricRecord]:
    return [r for rep in reports for r in rep.records]


def to_csv(reports: Sequence[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records_of(reports):
        w.writerow([_cell(v) for v in _row(r).values()])
    return buf.getvalue()


def to_jsonl(reports: Sequence[RunReport]) -> str:
    return "".join(json.dumps(_row(r), separators=(",", ":")) + "\n" for r in records_of(reports))


def sweep_csv(points: Sequence[SweepPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for p in points:
        for r in p.report.records:
            w.writerow([p.param, _cell(p.value)] + [_cell(v) for v in _row(r).values()])
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for row in rows:
        row["seed"] = int(row["seed"])
        row["value"] = float(row["value"])
        row["sim_time_ps"] = int(row["sim_time_ps"])
    return rows


def parse_jsonl(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line]


def output_dir(cli_value: str | None = None) -> Path:
    if cli_value:
        return Path(cli_value)
    return Path(os.environ.get(OUT_ENV, "out"))


def emit(reports: Sequence[RunReport], fmt: str, destination, name: str = "metrics") -> Path:
    """Write ``<destination>/<name>.<fmt>`` and return its path."""
    if fmt == "csv":
        text = to_csv(reports)
    elif fmt == "jsonl":
        text = to_jsonl(reports)
    else:
        raise ValueError(f"format must be csv or jsonl, not {fmt!r}")
    return write_text(Path(destination) / f"{name}.{fmt}", text)


def write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e.strerror or e}") from e
    return path
