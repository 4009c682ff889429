"""Serialization of configurations, results and reports.

Data files are written deterministically: sorted JSON keys, fixed float
formatting via ``repr`` and no wall-clock content.  Timestamps live only in
the run manifest.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import Configuration

RESULT_SCHEMA = "hardcore.result/1"
CONFIG_SCHEMA = "hardcore.configuration/1"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v
        if math.isnan(v):
            return None
        return "inf" if v > 0 else "-inf"
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def result_to_dict(result) -> dict:
    return {
        "schema": RESULT_SCHEMA,
        "engine": result.engine,
        "status": result.status,
        "tie_degenerate": result.tie_degenerate,
        "cap_radius": result.cap_radius,
        "window": result.config.window,
        "dimension": result.config.dimension,
        "grains": [{
            "id": g.id,
            "x": g.grain.x,
            "t": g.grain.t,
            "shape": g.grain.shape.to_dict(),
            "R": g.R,
            "status": g.status,
            "round": g.round,
            "earlier_neighbour_ids": list(g.earlier_neighbour_ids),
        } for g in result.grains],
    }


def grains_rows(result):
    d = result.config.dimension
    header = ["id"] + [f"x{k}" for k in range(d)] + ["t", "R", "status"]
    rows = [[g.id, *map(float, g.grain.x), float(g.grain.t), float(g.R), g.status]
            for g in result.grains]
    return header, rows


def configuration_to_dict(config: Configuration) -> dict:
    return {"schema": CONFIG_SCHEMA, **config.to_dict()}


def load_configuration(path) -> Configuration:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"configuration file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    try:
        return Configuration.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{p}: malformed configuration ({exc})") from None
