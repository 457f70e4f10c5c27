"""Blocked k-fold cross-validation over a grid of model specs."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..data import ModeSeries, PanelSeries
from ..exceptions import DomainError, InsufficientDataError
from ..models.design import DesignSet, build_design, check_modes
from ..models.ols import ols_solve
from ..models.spec import Family, ModelSpec
from .scoring import rmse, site_average

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldPlan:
    """Contiguous, near-equal blocks of issue indices.

    The first ``n % k`` blocks hold one extra point.
    """

    points: np.ndarray
    bounds: np.ndarray  # fold f covers points[bounds[f]:bounds[f + 1]]

    @property
    def k(self) -> int:
        return len(self.bounds) - 1

    def test_points(self, fold: int) -> np.ndarray:
        return self.points[self.bounds[fold]:self.bounds[fold + 1]]

    def train_points(self, fold: int) -> np.ndarray:
        return np.concatenate([self.points[:self.bounds[fold]], self.points[self.bounds[fold + 1]:]])

    def fold_of(self, index) -> np.ndarray:
        """Fold id of each issue index (-1 if not a planned point)."""
        index = np.asarray(index)
        pos = np.searchsorted(self.points, index)
        pos_c = np.minimum(pos, len(self.points) - 1)
        found = self.points[pos_c] == index
        fold = np.searchsorted(self.bounds, pos_c, side="right") - 1
        return np.where(found, fold, -1)


def make_folds(points, k: int = 10) -> FoldPlan:
    """Split ``points`` (a count or a sorted index array) into ``k`` blocks."""
    points = np.arange(points) if np.ndim(points) == 0 else np.sort(np.asarray(points))
    n = len(points)
    if k < 2:
        raise DomainError("need at least two folds")
    if n < k:
        raise DomainError(f"{n} points cannot form {k} folds")
    base, extra = divmod(n, k)
    sizes = np.full(k, base)
    sizes[:extra] += 1
    return FoldPlan(points, np.concatenate([[0], np.cumsum(sizes)]))


def cross_validate_design(design: DesignSet, plan: FoldPlan, fold_order=None):
    """Out-of-fold predictions for one design set.

    Each fold's coefficients are estimated from rows whose issue index lies
    outside that fold. Returns ``(coefficients, predictions)`` where
    ``coefficients[f]`` is the matrix fitted without fold ``f``.
    """
    folds = plan.fold_of(design.issue_index)
    pred = np.full(design.Y.shape, np.nan)
    coefs = {}
    for f in (range(plan.k) if fold_order is None else fold_order):
        test = folds == f
        train = (folds != f) & (folds >= 0)
        if not test.any():
            continue
        if not train.any():
            raise InsufficientDataError(f"fold {f} leaves no training rows", design.horizon, design.mode)
        B, _ = ols_solve(design.X[train], design.Y[train])
        coefs[f] = B
        pred[test] = design.X[test] @ B.T
    return coefs, pred


def _cell_label(spec: ModelSpec) -> str:
    if spec.family is Family.PERSISTENCE:
        return "Persistence"
    label = f"{spec.family.value}(p={spec.p}"
    if spec.family.needs_modes:
        label += f",M={spec.n_modes}"
    return label + ")"


def _residual_frame(panel, idx, horizon, site_idx, pred, actual):
    return pd.DataFrame({
        "issue_index": idx,
        "horizon": horizon,
        "site": np.asarray(panel.sites, dtype=object)[site_idx],
        "forecast": pred,
        "actual": actual,
        "error": pred - actual,
    })


def cv_residuals(panel: PanelSeries, modes: ModeSeries | None, spec: ModelSpec, plan: FoldPlan,
                 fold_order=None) -> pd.DataFrame:
    """Pooled out-of-fold residual records of one grid cell."""
    check_modes(panel, modes, spec)
    frames = []
    T, N = panel.values.shape
    for h in spec.horizons:
        if spec.family is Family.PERSISTENCE:
            idx = plan.points[(plan.points + h < T)]
            pred = panel.values[idx]
            actual = panel.values[idx + h]
            site_idx = np.tile(np.arange(N), idx.size)
            frames.append(_residual_frame(panel, np.repeat(idx, N), h, site_idx, pred.ravel(), actual.ravel()))
            continue
        sites = range(N) if spec.family.univariate else [None]
        for s in spec.partitions:
            for n in sites:
                design = build_design(panel, modes, spec, h, s, site=n)
                _, pred = cross_validate_design(design, plan, fold_order)
                site_idx = np.tile(np.arange(N) if n is None else [n], len(design))
                frames.append(_residual_frame(
                    panel, np.repeat(design.issue_index, pred.shape[1]), h, site_idx,
                    pred.ravel(), design.Y.ravel()))
    out = pd.concat(frames, ignore_index=True)
    return out.dropna(subset=["error"])


@dataclass
class CVResult:
    """Cross-validation scores.

    ``scores`` has one row per (cell, horizon) with the unweighted site
    average ``rmse`` and the pooled ``rmse_pooled``; ``summary`` averages
    these over horizons per cell; ``winner`` is the cell with lowest
    summary ``rmse``.
    """

    scores: pd.DataFrame
    summary: pd.DataFrame
    specs: dict
    failures: dict = field(default_factory=dict)

    @property
    def winner(self) -> ModelSpec | None:
        if self.summary.empty:
            return None
        return self.specs[self.summary.sort_values(["rmse", "cell"]).iloc[0]["cell"]]


def _modes_for(spec: ModelSpec, modes):
    if not spec.family.needs_modes:
        return None
    if isinstance(modes, dict):
        if spec.n_modes not in modes:
            raise DomainError(f"no mode series with {spec.n_modes} modes")
        return modes[spec.n_modes]
    if modes is None:
        raise DomainError(f"{spec.family.value} needs a mode series")
    if modes.n_modes != spec.n_modes:
        raise DomainError(f"mode series has {modes.n_modes} modes, spec wants {spec.n_modes}")
    return modes


def cross_validate(
    panel: PanelSeries,
    modes,
    grid,
    k: int = 10,
    plan: FoldPlan | None = None,
    n_jobs: int = 1,
) -> CVResult:
    """Score every spec in ``grid`` by blocked k-fold cross-validation.

    ``modes`` is None, a single :class:`ModeSeries`, or a dict mapping a mode
    count to its series. Folds are contiguous blocks of issue times; a cell
    that cannot be fitted in some fold is reported in ``failures`` and
    skipped.
    """
    grid = list(grid)
    if not grid:
        raise DomainError("empty model grid")
    plan = plan or make_folds(len(panel), k)
    labels = [_cell_label(s) for s in grid]

    def run(i):
        spec = grid[i]
        try:
            res = cv_residuals(panel, _modes_for(spec, modes), spec, plan)
        except (InsufficientDataError, DomainError) as exc:
            logger.warning("cell %s skipped: %s", labels[i], exc)
            return i, exc
        per_site = rmse(res, by=("horizon", "site"))
        table = site_average(per_site, by=("horizon",))
        return i, table

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, range(len(grid))))
    else:
        results = [run(i) for i in range(len(grid))]

    tables, failures, specs = [], {}, {}
    for i, out in results:
        if isinstance(out, Exception):
            failures[labels[i]] = str(out)
            continue
        spec = grid[i]
        specs[labels[i]] = spec
        tables.append(out.assign(
            cell=labels[i], family=spec.family.value, p=spec.p, n_modes=spec.n_modes))
    cols = ["cell", "family", "p", "n_modes", "horizon", "rmse", "rmse_pooled", "count"]
    scores = pd.concat(tables, ignore_index=True)[cols] if tables else pd.DataFrame(columns=cols)
    scores = scores.drop_duplicates(subset=["cell", "horizon"]).reset_index(drop=True)
    summary = (
        scores.groupby(["cell", "family", "p", "n_modes"], sort=False)[["rmse", "rmse_pooled"]]
        .mean().reset_index()
    )
    return CVResult(scores, summary, specs, failures)
