"""Forecast error scores, improvement over a reference and error histograms."""

from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from ..data import ModeSeries, PanelSeries, to_utc

logger = logging.getLogger(__name__)


def attach_actuals(forecasts: pd.DataFrame, actuals: PanelSeries) -> pd.DataFrame:
    """Copy of ``forecasts`` with ``actual``, ``target_index`` and ``error`` columns.

    ``error`` is forecast minus actual; it is NaN where the actual is
    missing or beyond the end of the panel.
    """
    df = forecasts.copy()
    if "issue_index" not in df:
        offset = (pd.to_datetime(df["issue_time"], utc=True) - pd.Timestamp(to_utc(actuals.start))) / actuals.step
        df["issue_index"] = offset.round().astype(np.int64)
    target = df["issue_index"].to_numpy() + df["horizon"].to_numpy()
    site = df["site"].map({s: k for k, s in enumerate(actuals.sites)})
    if site.isna().any():
        raise KeyError(f"unknown site(s): {sorted(set(df['site'][site.isna()]))}")
    site = site.to_numpy(dtype=np.int64)
    ok = (target >= 0) & (target < len(actuals))
    actual = np.full(len(df), np.nan)
    actual[ok] = actuals.values[target[ok], site[ok]]
    df["target_index"] = target
    df["actual"] = actual
    df["error"] = df["forecast"].to_numpy() - actual
    return df


def rmse(forecasts: pd.DataFrame, actuals: PanelSeries | None = None, by=("horizon",)) -> pd.DataFrame:
    """Root mean squared error per group.

    ``forecasts`` either carries an ``error`` column or is matched against
    ``actuals``. Records without an actual are excluded and counted in the
    log. Returns columns ``*by, rmse, mse, count``.
    """
    df = forecasts if actuals is None else attach_actuals(forecasts, actuals)
    missing = int(df["error"].isna().sum())
    if missing:
        logger.info("excluded %d forecast(s) without a matching actual", missing)
    df = df.dropna(subset=["error"])
    by = list(by)
    e2 = df["error"].to_numpy() ** 2
    if not by:
        if len(df) == 0:
            logger.warning("no forecasts to score")
            return pd.DataFrame(columns=["rmse", "mse", "count"])
        mse = float(e2.mean())
        return pd.DataFrame({"rmse": [np.sqrt(mse)], "mse": [mse], "count": [len(df)]})
    g = df.assign(_e2=e2).groupby(by, sort=True)["_e2"]
    out = pd.DataFrame({"mse": g.mean(), "count": g.size()}).reset_index()
    out = out[out["count"] > 0]
    out.insert(len(by), "rmse", np.sqrt(out["mse"].to_numpy()))
    return out.reset_index(drop=True)


def site_average(table: pd.DataFrame, by=("horizon",)) -> pd.DataFrame:
    """Unweighted mean over sites of per-site RMSE, plus the pooled RMSE.

    ``table`` must contain a ``site`` key alongside ``by``.
    """
    by = list(by)
    g = table.groupby(by, sort=True)
    out = pd.DataFrame({
        "rmse": g["rmse"].mean(),
        "rmse_pooled": np.sqrt(g.apply(lambda d: np.average(d["mse"], weights=d["count"]), include_groups=False)),
        "count": g["count"].sum(),
    })
    return out.reset_index()


def improvement(table: pd.DataFrame, reference: str, model_col: str = "model", value_col: str = "rmse") -> pd.DataFrame:
    """Add ``improvement_pct`` = 100 * (reference - value) / reference.

    Rows are matched to the reference on every column other than the
    model and score columns. Raises KeyError if any key lacks a reference row.
    """
    score_cols = {value_col, "rmse", "rmse_pooled", "mse", "count", "improvement_pct"}
    keys = [c for c in table.columns if c != model_col and c not in score_cols]
    ref = table[table[model_col] == reference]
    if ref.empty:
        raise KeyError(f"reference model {reference!r} not in table")
    ref = ref[keys + [value_col]].rename(columns={value_col: "_ref"})
    out = table.merge(ref, on=keys, how="left") if keys else table.assign(_ref=ref["_ref"].iloc[0])
    if out["_ref"].isna().any():
        raise KeyError(f"reference {reference!r} missing for some keys")
    out["improvement_pct"] = 100.0 * (out["_ref"] - out[value_col]) / out["_ref"]
    return out.drop(columns="_ref")


def error_distribution(
    forecasts: pd.DataFrame,
    actuals: PanelSeries | None,
    modes: ModeSeries,
    bin_width: float = 0.25,
    by=("site", "mode"),
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Histograms and moments of forecast errors per group.

    The mode of a record is the mode at its issue time. Bins are
    ``[k * bin_width, (k + 1) * bin_width)``. Skewness is the biased
    Fisher-Pearson coefficient, 0 for groups with zero spread.

    Returns ``(histograms, moments)`` with columns
    ``*by, bin_left, bin_right, count`` and ``*by, n, mean, sd, skew``.
    """
    df = forecasts if actuals is None else attach_actuals(forecasts, actuals)
    df = df.dropna(subset=["error"]).copy()
    if "mode" not in df:
        df["mode"] = modes.labels[df["issue_index"].to_numpy()]
    df["_bin"] = np.floor(df["error"].to_numpy() / bin_width).astype(np.int64)
    by = list(by)
    hist = df.groupby(by + ["_bin"], sort=True).size().rename("count").reset_index()
    hist["bin_left"] = hist.pop("_bin") * bin_width
    hist["bin_right"] = hist["bin_left"] + bin_width
    hist = hist[by + ["bin_left", "bin_right", "count"]]

    rows = []
    for key, grp in df.groupby(by, sort=True):
        e = grp["error"].to_numpy()
        mean = e.mean()
        sd = e.std()
        skew = float(((e - mean) ** 3).mean() / sd**3) if sd > 0 else 0.0
        key = key if isinstance(key, tuple) else (key,)
        rows.append((*key, e.size, mean, sd, skew))
    moments = pd.DataFrame(rows, columns=by + ["n", "mean", "sd", "skew"])
    return hist, moments
