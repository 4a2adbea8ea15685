"""Deterministic JSON and CSV report writers.

The result payload of a report depends only on the resolved configuration;
wall-clock data goes into a sibling ``.meta.json`` file so that reruns with
the same seed produce byte-identical result files.
"""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

SCHEMA = "entlab-report/1"


def to_plain(obj):
    """Convert numpy scalars/arrays, complex numbers and tuples into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_plain(obj.real), "im": to_plain(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(to_plain(obj), indent=2, sort_keys=True) + "\n"


def output_dir(path: str | None) -> Path:
    out = Path(path or os.environ.get("ENTLAB_OUT", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_csv(path: Path, rows: list[dict], columns: list[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = columns or (list(rows[0].keys()) if rows else [])
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in columns})
    return path


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return " ".join(str(_cell(v)) for v in value)
    return value


def build_report(command: str, config: dict, result: dict, violations: list, version: str) -> dict:
    return {"schema": SCHEMA, "version": version, "command": command, "config": config,
            "violations": violations, "ok": not violations, "result": result}
