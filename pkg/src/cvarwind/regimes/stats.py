"""Frequency and persistence statistics of a mode series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import ModeSeries


def run_lengths(labels) -> tuple[np.ndarray, np.ndarray]:
    """Run-length encode ``labels`` into (values, lengths)."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return labels[:0], np.zeros(0, dtype=np.int64)
    cut = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate([[0], cut])
    lengths = np.diff(np.concatenate([starts, [labels.size]]))
    return labels[starts], lengths


@dataclass(frozen=True)
class ModeStats:
    """Occurrence statistics per mode.

    ``durations[m]`` lists event lengths in steps; multiply by
    ``step_hours`` for hours. ``monthly[m - 1, month - 1]`` is the share of
    mode ``m``'s time steps falling in that calendar month.
    """

    n_modes: int
    step_hours: float
    frequency: np.ndarray
    monthly: np.ndarray
    durations: dict

    def mean_duration_hours(self, mode: int) -> float:
        d = self.durations[mode]
        return float(np.mean(d) * self.step_hours) if len(d) else float("nan")

    def median_duration_hours(self, mode: int) -> float:
        d = self.durations[mode]
        return float(np.median(d) * self.step_hours) if len(d) else float("nan")


def mode_stats(modes: ModeSeries) -> ModeStats:
    labels = modes.labels
    M = modes.n_modes
    counts = np.bincount(labels, minlength=M + 1)[1:]
    frequency = counts / labels.size
    months = np.asarray(modes.timestamps.month)
    monthly = np.zeros((M, 12))
    np.add.at(monthly, (labels - 1, months - 1), 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        monthly = np.where(counts[:, None] > 0, monthly / counts[:, None], 0.0)
    values, lengths = run_lengths(labels)
    durations = {m: lengths[values == m].astype(np.int64) for m in range(1, M + 1)}
    return ModeStats(M, modes.step.total_seconds() / 3600.0, frequency, monthly, durations)
