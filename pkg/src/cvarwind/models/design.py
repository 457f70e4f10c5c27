"""Design and target matrices per horizon and mode partition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..data import ModeSeries, PanelSeries
from ..exceptions import AlignmentError, DomainError, InsufficientDataError
from .spec import ModelSpec


@dataclass(frozen=True, eq=False)
class DesignSet:
    """Stacked design rows ``X`` and targets ``Y`` for one (horizon, mode).

    ``issue_index[r]`` is the panel row of the forecast issue time of design
    row ``r``; its target is panel row ``issue_index[r] + horizon``.
    """

    X: np.ndarray
    Y: np.ndarray
    issue_index: np.ndarray
    horizon: int
    mode: int = 0
    site: int | None = None
    feature_names: list = field(default_factory=list)
    n_dropped: int = 0

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, mask) -> "DesignSet":
        return DesignSet(
            self.X[mask], self.Y[mask], self.issue_index[mask], self.horizon, self.mode,
            self.site, self.feature_names, self.n_dropped,
        )


def check_modes(panel: PanelSeries, modes: ModeSeries | None, spec: ModelSpec) -> None:
    if not spec.family.needs_modes:
        return
    if modes is None:
        raise DomainError(f"{spec.family.value} needs a mode series")
    if modes.start != panel.start or modes.step != panel.step or len(modes) != len(panel):
        raise AlignmentError("mode series is not aligned with the panel; call align() first")


def hours_at(panel: PanelSeries, index) -> np.ndarray:
    """UTC hour of panel row ``index`` (may lie beyond the last row)."""
    t0 = pd.Timestamp(panel.start)
    offsets = pd.to_timedelta(np.asarray(index, dtype=np.int64) * panel.step.total_seconds(), unit="s")
    return np.asarray((t0 + offsets).hour)


def design_features(
    panel: PanelSeries,
    modes: ModeSeries | None,
    spec: ModelSpec,
    issue_index,
    horizon: int,
    site: int | None = None,
) -> np.ndarray:
    """Design rows for the given issue rows; missing lags propagate as NaN.

    Issue rows with fewer than ``p`` preceding observations get NaN lags.
    """
    idx = np.asarray(issue_index, dtype=np.int64)
    values = panel.values if site is None else panel.values[:, [site]]
    blocks = []
    for j in range(spec.p):
        lag_idx = idx - j
        block = np.full((idx.size, values.shape[1]), np.nan)
        ok = (lag_idx >= 0) & (lag_idx < values.shape[0])
        block[ok] = values[lag_idx[ok]]
        blocks.append(block)
    if spec.has_intercept:
        blocks.append(np.ones((idx.size, 1)))
    if spec.family.diurnal:
        h = hours_at(panel, idx + horizon)
        hours = np.asarray(spec.hours)
        match = h[:, None] == hours[None, :]
        if not match.any(axis=1).all():
            raise DomainError(f"hour {int(h[~match.any(axis=1)][0])} is not in the hour set")
        blocks.append(match.astype(float))
    if spec.family.mode_dummies:
        m = modes.labels[idx]
        blocks.append((m[:, None] == np.arange(2, spec.n_modes + 1)[None, :]).astype(float))
    return np.hstack(blocks) if blocks else np.empty((idx.size, 0))


def build_design(
    panel: PanelSeries,
    modes: ModeSeries | None,
    spec: ModelSpec,
    horizon: int,
    mode: int = 0,
    site: int | None = None,
) -> DesignSet:
    """Rows for issue times ``p-1 <= i <= T-1-horizon`` (0-based).

    Conditional families keep only rows whose issue-time mode equals
    ``mode``; rows with any missing value are dropped and counted. For
    univariate families ``site`` selects the column whose own lags are used.
    """
    check_modes(panel, modes, spec)
    if spec.family.univariate and site is None:
        raise DomainError("univariate families need a site index")
    T = len(panel)
    if T <= spec.p + horizon - 1:
        raise InsufficientDataError(
            f"T={T} too short for p={spec.p}, horizon={horizon}", horizon=horizon, mode=mode)
    idx = np.arange(spec.p - 1, T - horizon)
    if spec.family.conditional:
        if not 1 <= mode <= spec.n_modes:
            raise DomainError(f"mode {mode} outside 1..{spec.n_modes}")
        idx = idx[modes.labels[idx] == mode]
    X = design_features(panel, modes, spec, idx, horizon, site)
    Y = panel.values[idx + horizon] if site is None else panel.values[idx + horizon][:, [site]]
    keep = ~(np.isnan(X).any(axis=1) | np.isnan(Y).any(axis=1))
    design = DesignSet(
        X[keep], Y[keep], idx[keep], horizon, mode, site,
        spec.feature_names(panel.sites), int((~keep).sum()),
    )
    if len(design) == 0:
        raise InsufficientDataError(
            f"no usable rows for horizon={horizon}, mode={mode}", horizon=horizon, mode=mode)
    return design
