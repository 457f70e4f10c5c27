"""Estimation of every (horizon, mode) coefficient matrix of a model spec."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data import ModeSeries, PanelSeries
from ..exceptions import ParseError
from .design import build_design, check_modes
from .ols import ols_solve
from .spec import Family, ModelSpec

FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class FittedModelSet:
    """Coefficients ``B[(horizon, mode)]`` of shape (N, n_features).

    ``mode`` is 0 for unconditional families. For univariate families row
    ``n`` holds site ``n``'s own model over its own lags.
    """

    spec: ModelSpec
    sites: tuple
    coefficients: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def feature_names(self) -> list:
        return self.spec.feature_names(self.sites)

    def B(self, horizon: int, mode: int = 0) -> np.ndarray:
        return self.coefficients[(horizon, mode)]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "sites": list(self.sites),
            "feature_names": self.feature_names,
            "coefficients": [
                {"horizon": h, "mode": s, "B": B.tolist()}
                for (h, s), B in sorted(self.coefficients.items())
            ],
            "diagnostics": [
                {"horizon": h, "mode": s, **d} for (h, s), d in sorted(self.diagnostics.items())
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FittedModelSet":
        if doc.get("format_version") != FORMAT_VERSION:
            raise ParseError(f"unsupported model format {doc.get('format_version')!r}")
        try:
            spec = ModelSpec.from_dict(doc["spec"])
            sites = tuple(doc["sites"])
            n_feat = len(spec.feature_names(sites))
            coefs = {}
            for c in doc["coefficients"]:
                B = np.array(c["B"], dtype=float).reshape(len(sites), n_feat)
                if not np.all(np.isfinite(B)):
                    raise ValueError("non-finite coefficient")
                coefs[(int(c["horizon"]), int(c["mode"]))] = B
            diags = {(int(d.pop("horizon")), int(d.pop("mode"))): d for d in map(dict, doc.get("diagnostics", []))}
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed model document: {exc}") from exc
        model = cls(spec, sites, coefs, diags)
        missing = [k for k in required_keys(spec) if k not in coefs]
        if missing:
            raise ParseError(f"model document lacks coefficients for {missing}")
        return model

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "FittedModelSet":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(doc)


def site_order(sites) -> np.ndarray:
    """Stable permutation putting ``sites`` in sorted (canonical) order."""
    return np.array(sorted(range(len(sites)), key=lambda n: str(sites[n])), dtype=np.int64)


def canonical_panel(panel: PanelSeries, order: np.ndarray) -> PanelSeries:
    if np.array_equal(order, np.arange(panel.n_sites)):
        return panel
    sites = tuple(panel.sites[n] for n in order)
    return PanelSeries(panel.start, panel.step, sites, panel.values[:, order])


def permute_sites(B: np.ndarray, order: np.ndarray, p: int) -> np.ndarray:
    """Reorder the output rows and lag-block columns of a multivariate ``B``.

    Row ``n`` of the result is row ``order[n]`` of ``B``; the same holds
    for the site columns inside every lag block. Other columns are kept.
    """
    N = order.size
    cols = np.arange(B.shape[1])
    for j in range(p):
        cols[j * N:(j + 1) * N] = j * N + order
    return B[order][:, cols]


def required_keys(spec: ModelSpec) -> list:
    if spec.family is Family.PERSISTENCE:
        return []
    return [(h, s) for h in spec.horizons for s in spec.partitions]


def _fit_partition(panel, modes, spec, horizon, mode):
    if spec.family.univariate:
        rows, infos = [], []
        for n in range(panel.n_sites):
            design = build_design(panel, modes, spec, horizon, mode, site=n)
            B, info = ols_solve(design.X, design.Y)
            rows.append(B[0])
            infos.append((info, design.n_dropped))
        diag = {
            "n_rows": [i.n_rows for i, _ in infos],
            "n_dropped": [d for _, d in infos],
            "residual_rms": [i.residual_rms for i, _ in infos],
            "regularized": any(i.regularized for i, _ in infos),
        }
        return np.vstack(rows), diag
    design = build_design(panel, modes, spec, horizon, mode)
    B, info = ols_solve(design.X, design.Y)
    diag = {
        "n_rows": info.n_rows,
        "n_dropped": design.n_dropped,
        "residual_rms": info.residual_rms,
        "regularized": info.regularized,
        "ridge_lambda": info.ridge_lambda,
    }
    return B, diag


def fit(panel: PanelSeries, modes: ModeSeries | None, spec: ModelSpec, n_jobs: int = 1) -> FittedModelSet:
    """One least-squares fit per (horizon, mode partition).

    Raises InsufficientDataError naming the (horizon, mode) that has no
    usable rows. ``n_jobs`` only changes wall time, never results.
    """
    check_modes(panel, modes, spec)
    keys = required_keys(spec)
    # Multivariate fits run in sorted site order so that relabelling the
    # sites permutes the coefficients exactly, bit for bit.
    order = site_order(panel.sites)
    multivariate = not spec.family.univariate
    work_panel = canonical_panel(panel, order) if multivariate else panel

    def work(key):
        B, diag = _fit_partition(work_panel, modes, spec, *key)
        if multivariate:
            B = permute_sites(B, np.argsort(order), spec.p)
        return key, (B, diag)

    if n_jobs > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(work, keys))
    else:
        results = [work(k) for k in keys]
    coefs = {k: B for k, (B, _) in results}
    diags = {k: d for k, (_, d) in results}
    return FittedModelSet(spec, panel.sites, coefs, diags)
