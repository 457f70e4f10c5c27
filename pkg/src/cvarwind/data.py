"""Multi-site wind speed panels, mode series and calendar features.

Timestamps are timezone-aware UTC ``datetime`` objects throughout. Missing
measurements are stored as ``NaN``; a gap in a CSV file is materialised as a
fully missing row so that the time axis is always an arithmetic sequence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .exceptions import AlignmentError, DomainError, ParseError, ValidationError

logger = logging.getLogger(__name__)

HOUR = timedelta(hours=1)
DEFAULT_HOURS = tuple(range(24))
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def to_utc(t) -> datetime:
    """Coerce a string, ``datetime`` or pandas timestamp to an aware UTC datetime."""
    if isinstance(t, str):
        t = pd.Timestamp(t)
    if isinstance(t, pd.Timestamp):
        t = t.to_pydatetime()
    if not isinstance(t, datetime):
        raise DomainError(f"not a timestamp: {t!r}")
    if t.tzinfo is None:
        return t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def format_timestamp(t: datetime) -> str:
    return to_utc(t).strftime(TIMESTAMP_FORMAT)


class _TimeAxis:
    """Mixin for objects with ``start``, ``step`` and a length."""

    start: datetime
    step: timedelta

    def __len__(self) -> int:
        raise NotImplementedError

    @property
    def end(self) -> datetime:
        """Timestamp of the last row."""
        return self.start + (len(self) - 1) * self.step

    @property
    def timestamps(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=len(self), freq=self.step)

    def index_of(self, t) -> int:
        """Row index of timestamp ``t``; raises DomainError when off-grid."""
        t = to_utc(t)
        q, r = divmod(t - self.start, self.step)
        if r != timedelta(0) or not 0 <= q < len(self):
            raise DomainError(f"{format_timestamp(t)} is not a row of this series")
        return int(q)


@dataclass(frozen=True, eq=False)
class PanelSeries(_TimeAxis):
    """Hourly wind speeds for ``N`` sites on a gap-free time axis.

    Parameters
    ----------
    start : datetime
        Timestamp of the first row (UTC).
    step : timedelta
        Fixed spacing between rows.
    sites : sequence of str
        Unique site identifiers, one per column of ``values``.
    values : ndarray of shape (T, N)
        Wind speeds in m/s; ``NaN`` marks a missing measurement.
    """

    start: datetime
    step: timedelta
    sites: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValidationError("panel values must be a T x N matrix")
        sites = tuple(str(s) for s in self.sites)
        T, N = values.shape
        if T < 1 or N < 1:
            raise ValidationError("panel needs at least one row and one site")
        if len(sites) != N:
            raise ValidationError(f"{len(sites)} site names for {N} columns")
        if len(set(sites)) != N:
            raise ValidationError("site identifiers must be unique")
        if self.step <= timedelta(0):
            raise ValidationError("step must be positive")
        with np.errstate(invalid="ignore"):
            if np.any(values < 0):
                raise ValidationError("wind speeds must be non-negative")
        if np.any(np.isinf(values)):
            raise ValidationError("wind speeds must be finite")
        object.__setattr__(self, "start", to_utc(self.start))
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "values", _freeze(values))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_sites(self) -> int:
        return self.values.shape[1]

    @property
    def missing_fraction(self) -> dict:
        """Fraction of missing values per site."""
        frac = np.isnan(self.values).mean(axis=0)
        return {s: float(f) for s, f in zip(self.sites, frac)}

    def slice(self, lo: int, hi: int) -> "PanelSeries":
        """Rows ``lo`` (inclusive) to ``hi`` (exclusive)."""
        if not 0 <= lo < hi <= len(self):
            raise DomainError(f"invalid row range [{lo}, {hi})")
        return PanelSeries(self.start + lo * self.step, self.step, self.sites, self.values[lo:hi])

    def between(self, first, last) -> "PanelSeries":
        """Rows with timestamps in the closed interval ``[first, last]``."""
        lo = max(0, -(-(to_utc(first) - self.start) // self.step))
        hi = min(len(self), (to_utc(last) - self.start) // self.step + 1)
        if hi <= lo:
            raise DomainError("time range does not intersect the panel")
        return self.slice(lo, hi)

    def select_sites(self, sites: Sequence[str]) -> "PanelSeries":
        idx = [self.sites.index(s) for s in sites]
        return PanelSeries(self.start, self.step, tuple(sites), self.values[:, idx])

    def with_values(self, values) -> "PanelSeries":
        return PanelSeries(self.start, self.step, self.sites, values)


@dataclass(frozen=True, eq=False)
class ModeSeries(_TimeAxis):
    """Per-timestamp atmospheric mode label in ``{1..n_modes}``."""

    start: datetime
    step: timedelta
    labels: np.ndarray = field(repr=False)
    n_modes: int = 0

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size == 0:
            raise ValidationError("mode labels must be a non-empty 1-D sequence")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.isfinite(labels)) or np.any(labels != np.round(labels)):
                raise ValidationError("mode labels must be integers with no missing values")
            labels = labels.astype(np.int64)
        n_modes = int(self.n_modes) or int(labels.max())
        if labels.min() < 1 or labels.max() > n_modes:
            raise ValidationError(f"mode labels must lie in 1..{n_modes}")
        if self.step <= timedelta(0):
            raise ValidationError("step must be positive")
        object.__setattr__(self, "start", to_utc(self.start))
        object.__setattr__(self, "labels", _freeze(labels.astype(np.int64)))
        object.__setattr__(self, "n_modes", n_modes)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def slice(self, lo: int, hi: int) -> "ModeSeries":
        if not 0 <= lo < hi <= len(self):
            raise DomainError(f"invalid row range [{lo}, {hi})")
        return ModeSeries(self.start + lo * self.step, self.step, self.labels[lo:hi], self.n_modes)


def hour_dummies(t, hours: Sequence[int] = DEFAULT_HOURS) -> np.ndarray:
    """Indicator vector over ``hours`` selecting the UTC hour of ``t``.

    >>> hour_dummies("2002-01-01T05:00:00Z", range(12)).argmax()
    5
    """
    hours = list(hours)
    h = to_utc(t).hour
    if h not in hours:
        raise DomainError(f"hour {h} is not in the hour set")
    d = np.zeros(len(hours))
    d[hours.index(h)] = 1.0
    return d


def hour_dummy_matrix(timestamps: pd.DatetimeIndex, hours: Sequence[int] = DEFAULT_HOURS) -> np.ndarray:
    """Row-wise :func:`hour_dummies` for many timestamps at once."""
    hours = np.asarray(list(hours))
    h = np.asarray(timestamps.hour)
    match = h[:, None] == hours[None, :]
    bad = ~match.any(axis=1)
    if bad.any():
        raise DomainError(f"hour {int(h[bad][0])} is not in the hour set")
    return match.astype(float)


def align(panel: PanelSeries, modes: ModeSeries) -> tuple[PanelSeries, ModeSeries]:
    """Restrict a panel and a mode series to their common time window."""
    if panel.step != modes.step:
        raise AlignmentError(f"step mismatch: {panel.step} vs {modes.step}")
    if (modes.start - panel.start) % panel.step != timedelta(0):
        raise AlignmentError("time axes are offset by a fraction of a step")
    first = max(panel.start, modes.start)
    last = min(panel.end, modes.end)
    if last < first:
        raise AlignmentError("panel and mode series do not overlap")
    p0 = (first - panel.start) // panel.step
    m0 = (first - modes.start) // modes.step
    n = (last - first) // panel.step + 1
    if p0 == 0 and n == len(panel):
        out_panel = panel
    else:
        out_panel = panel.slice(p0, p0 + n)
    if m0 == 0 and n == len(modes):
        out_modes = modes
    else:
        out_modes = modes.slice(m0, m0 + n)
    return out_panel, out_modes


# ---------------------------------------------------------------------------
# CSV I/O


def _read_timestamps(df: pd.DataFrame, path) -> pd.DatetimeIndex:
    if df.columns[0] != "timestamp":
        raise ParseError(f"{path}: first column must be 'timestamp'")
    try:
        ts = pd.DatetimeIndex(pd.to_datetime(df["timestamp"], utc=True, format="ISO8601"))
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: bad timestamp ({exc})") from exc
    if len(ts) == 0:
        raise ParseError(f"{path}: no data rows")
    return ts


def _grid_positions(ts: pd.DatetimeIndex, path, step: timedelta | None = None) -> tuple[np.ndarray, timedelta]:
    """Map timestamps to integer row positions on a grid of ``step`` (default hourly)."""
    if len(ts) > 1 and np.any(np.diff(ts.asi8) <= 0):
        raise ParseError(f"{path}: timestamps are not strictly increasing")
    step = HOUR if step is None else step
    step_ns = int(step / timedelta(microseconds=1)) * 1000
    offsets = ts.asi8 - ts.asi8[0]
    if np.any(offsets % step_ns):
        raise ParseError(f"{path}: irregular time step")
    return offsets // step_ns, step


def load_panel_csv(path, step: timedelta | None = None) -> PanelSeries:
    """Read a panel CSV (``timestamp,<site_1>,...,<site_N>``).

    Empty fields are missing values. Rows lie on a grid of ``step`` (one
    hour by default); rows absent from the file are inserted as fully
    missing rows and off-grid timestamps raise ParseError. The per-site missing fraction is logged and is
    available as :attr:`PanelSeries.missing_fraction`.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype={"timestamp": str}, keep_default_na=False, na_values=[""],
                         float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if df.shape[1] < 2:
        raise ParseError(f"{path}: expected timestamp column and at least one site")
    ts = _read_timestamps(df, path)
    pos, step = _grid_positions(ts, path, step)
    try:
        raw = df.iloc[:, 1:].to_numpy(dtype=float)
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric wind speed ({exc})") from exc
    values = np.full((int(pos[-1]) + 1, raw.shape[1]), np.nan)
    values[pos] = raw
    panel = PanelSeries(ts[0].to_pydatetime(), step, tuple(df.columns[1:]), values)
    for site, frac in panel.missing_fraction.items():
        if frac > 0:
            logger.info("%s: site %s has %.2f%% missing values", path.name, site, 100 * frac)
    return panel


def _format_value(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def write_panel_csv(panel: PanelSeries, path) -> None:
    lines = ["timestamp," + ",".join(panel.sites)]
    for t, row in zip(panel.timestamps, panel.values):
        lines.append(format_timestamp(t) + "," + ",".join(_format_value(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_mode_csv(path, n_modes: int | None = None) -> ModeSeries:
    """Read a mode CSV (``timestamp,mode``) with 1-based integer labels."""
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype={"timestamp": str}, keep_default_na=False, na_values=[""])
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if list(df.columns) != ["timestamp", "mode"]:
        raise ParseError(f"{path}: header must be 'timestamp,mode'")
    ts = _read_timestamps(df, path)
    pos, step = _grid_positions(ts, path)
    if len(pos) != pos[-1] + 1:
        raise ValidationError(f"{path}: mode series has gaps")
    labels = df["mode"].to_numpy()
    if df["mode"].isna().any():
        raise ValidationError(f"{path}: missing mode labels")
    return ModeSeries(ts[0].to_pydatetime(), step, labels, n_modes or 0)


def write_mode_csv(modes: ModeSeries, path) -> None:
    lines = ["timestamp,mode"]
    lines += [f"{format_timestamp(t)},{int(m)}" for t, m in zip(modes.timestamps, modes.labels)]
    Path(path).write_text("\n".join(lines) + "\n")
