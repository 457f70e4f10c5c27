"""Report tables written as CSV with fixed headers.

==========================  ===================================================
file                        header
==========================  ===================================================
``table1.csv``              ``model,horizon,rmse,rmse_pooled,count``
``fig4.csv``                ``method,family,p,n_modes,rmse,rmse_pooled``
``fig7.csv``                ``model,horizon,rmse,improvement_pct``
``fig8.csv``                ``site,model,horizon,rmse,count``
``fig9_<site>.csv``         ``mode,bin_left,bin_right,count``
``fig9_moments.csv``        ``site,mode,n,mean,sd,skew``
``modestats.csv``           ``mode,frequency,n_events,mean_duration_h,median_duration_h``
``modestats_monthly.csv``   ``mode,month,frequency``
``grouping.csv``            ``n_modes,wcss,davies_bouldin``
==========================  ===================================================
"""

from __future__ import annotations

import re
from pathlib import Path

import pandas as pd

from ..regimes.stats import ModeStats

HEADERS = {
    "table1.csv": ["model", "horizon", "rmse", "rmse_pooled", "count"],
    "fig4.csv": ["method", "family", "p", "n_modes", "rmse", "rmse_pooled"],
    "fig7.csv": ["model", "horizon", "rmse", "improvement_pct"],
    "fig8.csv": ["site", "model", "horizon", "rmse", "count"],
    "fig9_site.csv": ["mode", "bin_left", "bin_right", "count"],
    "fig9_moments.csv": ["site", "mode", "n", "mean", "sd", "skew"],
    "modestats.csv": ["mode", "frequency", "n_events", "mean_duration_h", "median_duration_h"],
    "modestats_monthly.csv": ["mode", "month", "frequency"],
    "grouping.csv": ["n_modes", "wcss", "davies_bouldin"],
}

FLOAT_FORMAT = "%.6f"


def _write(df: pd.DataFrame, out, name: str, key: str | None = None) -> Path:
    path = Path(out) / name
    df[HEADERS[key or name]].to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def site_filename(site: str) -> str:
    """``fig9_<site>.csv`` with characters unsafe in file names replaced."""
    return f"fig9_{re.sub(r'[^A-Za-z0-9_.-]', '_', str(site))}.csv"


def write_table1(table: pd.DataFrame, out) -> Path:
    return _write(table, out, "table1.csv")


def write_fig4(result, out, method: str = "kmeans") -> Path:
    """CV score against mode count for the conditional families."""
    s = result.summary
    s = s[s["family"].isin(["CVAR", "CAR"])].sort_values(["family", "p", "n_modes"])
    return _write(s.assign(method=method), out, "fig4.csv")


def write_fig7(table: pd.DataFrame, out) -> Path:
    return _write(table, out, "fig7.csv")


def write_fig8(per_site: pd.DataFrame, out) -> Path:
    return _write(per_site.sort_values(["site", "model", "horizon"]), out, "fig8.csv")


def write_fig9(hist: pd.DataFrame, moments: pd.DataFrame, out) -> list:
    paths = []
    for site, grp in hist.groupby("site", sort=True):
        paths.append(_write(grp, out, site_filename(site), "fig9_site.csv"))
    paths.append(_write(moments, out, "fig9_moments.csv"))
    return paths


def write_modestats(stats: ModeStats, out) -> list:
    rows = [
        (m, stats.frequency[m - 1], len(stats.durations[m]),
         stats.mean_duration_hours(m), stats.median_duration_hours(m))
        for m in range(1, stats.n_modes + 1)
    ]
    summary = pd.DataFrame(rows, columns=HEADERS["modestats.csv"])
    monthly = pd.DataFrame(
        [(m, month, stats.monthly[m - 1, month - 1]) for m in range(1, stats.n_modes + 1) for month in range(1, 13)],
        columns=HEADERS["modestats_monthly.csv"],
    )
    return [_write(summary, out, "modestats.csv"), _write(monthly, out, "modestats_monthly.csv")]


def write_grouping_diagnostics(rows, out) -> Path:
    """``rows`` of (n_modes, wcss, davies_bouldin)."""
    return _write(pd.DataFrame(rows, columns=HEADERS["grouping.csv"]), out, "grouping.csv")
