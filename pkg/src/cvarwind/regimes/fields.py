"""Gridded atmospheric fields used as classification input."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

from ..data import _TimeAxis, _freeze, _grid_positions, _read_timestamps, format_timestamp, to_utc
from ..exceptions import ParseError, ValidationError

FLATTEN_ORDER = "variable,lat,lon"


@dataclass(frozen=True, eq=False)
class FieldStack(_TimeAxis):
    """``T x (V*G)`` matrix of gridded variables.

    Columns are flattened row-major over (variable, lat, lon), so column
    ``v*G + i*n_lon + j`` holds variable ``v`` at grid cell ``(lat[i], lon[j])``.
    """

    start: datetime
    step: timedelta
    variables: tuple
    lat: np.ndarray = field(repr=False)
    lon: np.ndarray = field(repr=False)
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        lat = np.atleast_1d(np.asarray(self.lat, dtype=float))
        lon = np.atleast_1d(np.asarray(self.lon, dtype=float))
        variables = tuple(str(v) for v in self.variables)
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValidationError("field data must be a non-empty T x D matrix")
        expected = len(variables) * lat.size * lon.size
        if data.shape[1] != expected:
            raise ValidationError(f"field has {data.shape[1]} columns, grid implies {expected}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("field data must be complete (no missing entries)")
        object.__setattr__(self, "start", to_utc(self.start))
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "lat", _freeze(lat))
        object.__setattr__(self, "lon", _freeze(lon))
        object.__setattr__(self, "data", _freeze(data))

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def n_cells(self) -> int:
        return self.lat.size * self.lon.size

    def variable(self, name: str) -> np.ndarray:
        """``T x G`` block of one variable."""
        v = self.variables.index(name)
        G = self.n_cells
        return self.data[:, v * G:(v + 1) * G]

    def with_data(self, data) -> "FieldStack":
        return FieldStack(self.start, self.step, self.variables, self.lat, self.lon, data)


def load_fields(meta_path) -> FieldStack:
    """Load a field stack from its JSON sidecar and per-variable CSV files.

    The sidecar holds ``variables``, ``lat``, ``lon``, ``order`` and an
    optional ``files`` mapping (variable -> CSV path relative to the sidecar;
    default ``<variable>.csv``). Each CSV has header
    ``timestamp,cell_0,...,cell_{G-1}`` with cells ordered lat-major.
    """
    meta_path = Path(meta_path)
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{meta_path}: invalid JSON ({exc})") from exc
    order = meta.get("order", FLATTEN_ORDER)
    if order != FLATTEN_ORDER:
        raise ParseError(f"{meta_path}: unsupported flattening order {order!r}")
    variables = meta["variables"]
    lat, lon = np.asarray(meta["lat"], float), np.asarray(meta["lon"], float)
    G = lat.size * lon.size
    files = meta.get("files", {})
    blocks, ts0, step, n_rows = [], None, None, None
    for var in variables:
        path = meta_path.parent / files.get(var, f"{var}.csv")
        if not path.exists():
            raise FileNotFoundError(path)
        df = pd.read_csv(path, dtype={"timestamp": str})
        ts = _read_timestamps(df, path)
        pos, s = _grid_positions(ts, path)
        if len(pos) != pos[-1] + 1:
            raise ValidationError(f"{path}: field rows have gaps")
        if list(df.columns[1:]) != [f"cell_{i}" for i in range(G)]:
            raise ParseError(f"{path}: expected columns cell_0..cell_{G - 1}")
        if ts0 is None:
            ts0, step, n_rows = ts[0], s, len(ts)
        elif ts[0] != ts0 or s != step or len(ts) != n_rows:
            raise ValidationError(f"{path}: time axis differs from {variables[0]}")
        blocks.append(df.iloc[:, 1:].to_numpy(dtype=float))
    return FieldStack(ts0.to_pydatetime(), step, tuple(variables), lat, lon, np.hstack(blocks))


def write_fields(fields: FieldStack, meta_path) -> list[Path]:
    """Write the sidecar and one CSV per variable; returns the written paths."""
    meta_path = Path(meta_path)
    stem = meta_path.stem
    files = {v: f"{stem}_{v}.csv" for v in fields.variables}
    meta = {
        "variables": list(fields.variables),
        "lat": fields.lat.tolist(),
        "lon": fields.lon.tolist(),
        "order": FLATTEN_ORDER,
        "files": files,
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    written = [meta_path]
    stamps = [format_timestamp(t) for t in fields.timestamps]
    header = "timestamp," + ",".join(f"cell_{i}" for i in range(fields.n_cells))
    for v in fields.variables:
        block = fields.variable(v)
        lines = [header]
        lines += [s + "," + ",".join(f"{x:.6f}" for x in row) for s, row in zip(stamps, block)]
        path = meta_path.parent / files[v]
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    return written
