"""Direct multi-horizon point forecasts from fitted coefficient sets."""

from __future__ import annotations

from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from ..data import ModeSeries, PanelSeries, format_timestamp, to_utc
from ..exceptions import DomainError
from .design import check_modes, design_features
from .fitting import FittedModelSet, canonical_panel, permute_sites, site_order
from .spec import Family

FORECAST_COLUMNS = ["issue_time", "horizon", "site", "forecast", "fallback"]


class Forecast(NamedTuple):
    values: np.ndarray
    raw: np.ndarray
    fallback: np.ndarray


def last_observed(panel: PanelSeries) -> np.ndarray:
    """Latest non-missing value at or before each row (NaN if none yet)."""
    return pd.DataFrame(panel.values).ffill().to_numpy()


def _apply(X: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise ``X @ B.T``; each row's result does not depend on the batch."""
    return np.einsum("ij,kj->ik", X, B)


def _issue_index(panel: PanelSeries, t) -> int:
    if isinstance(t, (int, np.integer)):
        if not 0 <= t < len(panel):
            raise DomainError(f"issue index {t} outside the panel")
        return int(t)
    return panel.index_of(t)


def forecast_rows(
    model: FittedModelSet,
    panel: PanelSeries,
    modes: ModeSeries | None,
    issue_index,
    horizon: int,
    clamp: bool = True,
    observed: np.ndarray | None = None,
) -> Forecast:
    """Forecasts of ``y[i + horizon]`` for each issue row ``i``.

    Only rows ``<= i`` of ``panel`` are read. Where a required lag is
    missing the forecast is the latest observed value and flagged.
    """
    spec = model.spec
    idx = np.asarray(issue_index, dtype=np.int64)
    if tuple(panel.sites) != tuple(model.sites):
        raise DomainError("panel sites differ from the fitted model")
    check_modes(panel, modes, spec)
    if observed is None:
        observed = last_observed(panel)
    persistence = observed[idx]
    N = panel.n_sites

    if spec.family is Family.PERSISTENCE:
        raw = persistence.copy()
        fallback = np.isnan(panel.values[idx])
    else:
        if horizon not in spec.horizons:
            raise DomainError(f"model has no horizon {horizon}")
        if spec.family.conditional:
            labels = modes.labels[idx]
            if labels.size and (labels.min() < 1 or labels.max() > spec.n_modes):
                raise DomainError(f"mode label outside 1..{spec.n_modes}")
        raw = np.empty((idx.size, N))
        if spec.family.univariate:
            fallback = np.zeros((idx.size, N), dtype=bool)
            for n in range(N):
                X = design_features(panel, modes, spec, idx, horizon, site=n)
                fallback[:, n] = np.isnan(X).any(axis=1)
                if spec.family.conditional:
                    for s in range(1, spec.n_modes + 1):
                        sel = labels == s
                        raw[sel, n] = _apply(X[sel], model.B(horizon, s)[[n]])[:, 0]
                else:
                    raw[:, n] = _apply(X, model.B(horizon)[[n]])[:, 0]
        else:
            # evaluate in the canonical site order used by fit()
            order = site_order(panel.sites)
            X = design_features(canonical_panel(panel, order), modes, spec, idx, horizon)
            bad = np.isnan(X).any(axis=1)
            fallback = np.repeat(bad[:, None], N, axis=1)
            if spec.family.conditional:
                for s in range(1, spec.n_modes + 1):
                    sel = labels == s
                    raw[sel] = _apply(X[sel], permute_sites(model.B(horizon, s), order, spec.p))
            else:
                raw = _apply(X, permute_sites(model.B(horizon), order, spec.p))
            raw = raw[:, np.argsort(order)]
        raw = np.where(fallback, persistence, raw)
    values = np.maximum(raw, 0.0) if clamp else raw.copy()
    return Forecast(values, raw, fallback)


def forecast(model, panel, modes, t, horizon, clamp=True) -> Forecast:
    """Length-N forecast of ``y[t + horizon]`` issued at time (or row) ``t``."""
    i = _issue_index(panel, t)
    f = forecast_rows(model, panel, modes, [i], horizon, clamp)
    return Forecast(f.values[0], f.raw[0], f.fallback[0])


def rolling_forecast(
    model: FittedModelSet,
    panel: PanelSeries,
    modes: ModeSeries | None = None,
    window=None,
    horizons=None,
    clamp: bool = True,
) -> pd.DataFrame:
    """Forecast records for every issue time in ``window`` and every horizon.

    ``window`` is a ``(first, last)`` pair of timestamps or row indices,
    inclusive; ``None`` covers the whole panel. Records are ordered by issue
    time, horizon, then site, with columns ``issue_time, horizon, site,
    forecast, fallback, raw, issue_index``.
    """
    if window is None:
        lo, hi = 0, len(panel) - 1
    else:
        lo, hi = (_issue_index(panel, w) for w in window)
    if hi < lo:
        raise DomainError("empty forecast window")
    horizons = tuple(horizons or model.spec.horizons)
    idx = np.arange(lo, hi + 1)
    observed = last_observed(panel)
    stamps = panel.timestamps[idx]
    N = panel.n_sites
    frames = []
    for h in horizons:
        f = forecast_rows(model, panel, modes, idx, h, clamp, observed)
        frames.append(pd.DataFrame({
            "issue_index": np.repeat(idx, N),
            "issue_time": np.repeat(stamps, N),
            "horizon": h,
            "site": np.tile(np.asarray(panel.sites, dtype=object), idx.size),
            "forecast": f.values.ravel(),
            "fallback": f.fallback.ravel(),
            "raw": f.raw.ravel(),
        }))
    out = pd.concat(frames, ignore_index=True)
    site_order = {s: k for k, s in enumerate(panel.sites)}
    out["_site"] = out["site"].map(site_order)
    out = out.sort_values(["issue_index", "horizon", "_site"], kind="stable").drop(columns="_site")
    out = out.reset_index(drop=True)
    return out[["issue_time", "horizon", "site", "forecast", "fallback", "raw", "issue_index"]]


def write_forecast_csv(forecasts: pd.DataFrame, path) -> None:
    df = forecasts[FORECAST_COLUMNS].copy()
    df["issue_time"] = [format_timestamp(t) for t in df["issue_time"]]
    df["fallback"] = df["fallback"].astype(int)
    df.to_csv(Path(path), index=False, float_format="%.6f", na_rep="")


def read_forecast_csv(path, panel: PanelSeries | None = None) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"issue_time": str, "site": str})
    if list(df.columns) != FORECAST_COLUMNS:
        raise DomainError(f"{path}: expected header {','.join(FORECAST_COLUMNS)}")
    df["issue_time"] = pd.to_datetime(df["issue_time"], utc=True)
    df["fallback"] = df["fallback"].astype(bool)
    if panel is not None:
        offset = (df["issue_time"] - pd.Timestamp(to_utc(panel.start))) / panel.step
        df["issue_index"] = offset.round().astype(np.int64)
    return df
