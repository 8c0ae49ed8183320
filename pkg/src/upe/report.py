"""CSV and JSON writers with a fixed, versioned layout.

CSV numbers use nine significant digits and '.' as the decimal mark; JSON
keeps full precision so a re-read reproduces every float bitwise. Output
depends only on its inputs (no timestamps), so equal runs give equal bytes.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

MC_COLUMNS = ("estimator", "link", "tau", "n", "gamma", "statistic", "value", "mc_se")
EFFECT_COLUMNS = (
    "tau", "link", "effect", "mu", "point", "se", "ci_lo", "ci_hi", "elasticity",
    "t_stat", "p_value", "q_hat", "f_hat", "bandwidth",
)


def fmt(value) -> str:
    """Nine significant digits for floats, plain text otherwise; ``None`` is empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value) + 0.0  # folds -0.0 into 0.0
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.9g}"
    return str(value)


def write_csv(path, columns, rows) -> Path:
    """Write ``rows`` (mappings or sequences in ``columns`` order)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            values = [row.get(c) for c in columns] if isinstance(row, dict) else list(row)
            writer.writerow([fmt(v) for v in values])
    return path


def write_series(path, series: dict) -> Path:
    """Column-oriented plot series: one CSV column per key."""
    columns = list(series)
    arrays = [np.asarray(series[c]) for c in columns]
    return write_csv(path, columns, zip(*arrays))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"schema_version": SCHEMA_VERSION, **_jsonable(payload)}
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def mc_rows(summary) -> list[dict]:
    return [asdict(r) for r in summary.rows]
