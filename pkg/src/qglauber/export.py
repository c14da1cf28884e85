"""CSV and JSON interchange: matrices, time series, class grids, manifests.

Floats are written with 17 significant digits so doubles round-trip exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .observables import HammingClassGrid, TimeSeries

FLOAT_FMT = "%.17g"
SERIES_COLUMNS = ("t_mcs", "value", "stderr", "variant", "n_sites", "mode")
GRID_COLUMNS = ("c", "a", "b", "mean_abs", "mean_real", "count")


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FLOAT_FMT % x


def write_matrix_csv(path, m) -> Path:
    m = np.asarray(m)
    if np.iscomplexobj(m):
        if np.any(m.imag):
            raise ValueError("complex matrices are not supported in CSV export")
        m = m.real
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in m:
            w.writerow([FLOAT_FMT % v for v in row])
    return path


def read_matrix_csv(path, shape=None) -> np.ndarray:
    """Read a numeric CSV matrix; ValueError with a line-level diagnostic on bad input."""
    rows = []
    with Path(path).open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no data")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows (lengths {sorted(widths)})")
    m = np.array(rows)
    if shape is not None and m.shape != tuple(shape):
        raise ValueError(f"{path}: expected shape {tuple(shape)}, got {m.shape}")
    return m


def write_timeseries_csv(path, series: TimeSeries) -> Path:
    md = series.metadata
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        err = series.stderr if series.stderr is not None else [None] * len(series)
        for t, v, e in zip(series.times, series.values, err):
            w.writerow([fmt(float(t)), fmt(float(v)), fmt(None if e is None else float(e)),
                        md.get("variant", ""), md.get("n_sites", ""), md.get("mode", "")])
    return path


def read_timeseries_csv(path) -> TimeSeries:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SERIES_COLUMNS[:2]) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    times = [float(r["t_mcs"]) for r in rows]
    values = [float(r["value"]) for r in rows]
    errs = [r.get("stderr", "") for r in rows]
    stderr = None
    if all(e not in ("", None) for e in errs):
        stderr = [float(e) for e in errs]
    first = rows[0]
    md = {"variant": first.get("variant", ""), "mode": first.get("mode", "")}
    if first.get("n_sites"):
        md["n_sites"] = int(first["n_sites"])
    return TimeSeries(times, values, stderr, md)


def write_grid_csv(path, grid: HammingClassGrid) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_COLUMNS)
        for row in grid.rows():
            w.writerow([fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_manifest(command: str, **fields) -> dict:
    from datetime import datetime, timezone
    man = {"command": command, "tool_version": __version__,
           "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    man.update(fields)
    return man
