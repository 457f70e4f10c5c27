"""Regime-switching VAR data with known parameters.

Regimes follow a semi-Markov process: each event lasts a shifted-geometric
number of steps (at least ``min_duration``) and is followed by a different
regime drawn uniformly. Within regime ``s`` the panel evolves as

    y[t+1] = sum_i A[s, i] @ y[t-i] + beta[s, hour(t+1)] + eps,

with ``s`` the regime at time ``t``. Synthetic gridded fields carry one
fixed spatial pattern per regime plus smooth latent variability, so the
classification pipeline can rediscover the regimes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import HOUR, ModeSeries, PanelSeries, to_utc
from .exceptions import ValidationError
from .regimes.fields import FieldStack


def companion(coefs: np.ndarray) -> np.ndarray:
    """Companion matrix of a VAR with lag matrices ``coefs[i]`` (p, N, N)."""
    p, N, _ = coefs.shape
    F = np.zeros((N * p, N * p))
    F[:N] = np.hstack(list(coefs))
    F[N:, :-N] = np.eye(N * (p - 1))
    return F


def spectral_radius(coefs: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(companion(coefs))).max())


@dataclass(eq=False)
class SynthSpec:
    """Parameters of a synthetic regime-switching panel.

    ``coefficients`` has shape (M, p, N, N) with ``[s, i]`` the lag-``i+1``
    matrix of regime ``s + 1``; ``intercepts`` has shape (M, 24, N).
    """

    coefficients: np.ndarray
    intercepts: np.ndarray
    noise_sd: float = 0.1
    min_duration: int = 6
    mean_duration: float = 60.0
    n_steps: int = 50_000
    seed: int = 0
    start: str = "2002-01-01T00:00:00Z"
    sites: tuple = ()
    field_variables: tuple = ("SLP", "Z500", "WS")
    field_grid: tuple = (4, 5)
    field_latent_sd: float = 0.3
    field_noise_sd: float = 0.3

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        self.intercepts = np.asarray(self.intercepts, dtype=float)
        if self.coefficients.ndim != 4 or self.coefficients.shape[2] != self.coefficients.shape[3]:
            raise ValidationError("coefficients must have shape (M, p, N, N)")
        M, p, N, _ = self.coefficients.shape
        if self.intercepts.shape != (M, 24, N):
            raise ValidationError(f"intercepts must have shape ({M}, 24, {N})")
        if self.noise_sd < 0:
            raise ValidationError("noise_sd must be >= 0")
        if self.min_duration < 1 or self.mean_duration < self.min_duration:
            raise ValidationError("need 1 <= min_duration <= mean_duration")
        for s in range(M):
            rho = spectral_radius(self.coefficients[s])
            if rho >= 1:
                raise ValidationError(f"regime {s + 1} is not stationary (spectral radius {rho:.3f})")
        if not self.sites:
            self.sites = tuple(f"site_{n + 1}" for n in range(N))
        self.sites = tuple(self.sites)
        self.field_variables = tuple(self.field_variables)
        self.field_grid = tuple(self.field_grid)

    @property
    def n_modes(self) -> int:
        return self.coefficients.shape[0]

    @property
    def p(self) -> int:
        return self.coefficients.shape[1]

    @property
    def n_sites(self) -> int:
        return self.coefficients.shape[2]

    @classmethod
    def default(cls, n_sites=4, n_modes=3, p=2, noise_sd=0.1, n_steps=50_000, seed=0, **kw) -> "SynthSpec":
        """Regimes with distinct spatial coupling and wind levels.

        Sites lie on a west-east line. Regimes cycle through westerly
        advection (each site driven by its western neighbour), easterly
        advection and a weakly coupled calm state, each with its own mean
        level and diurnal amplitude.
        """
        rng = np.random.default_rng(seed)
        N = n_sites
        coefs = np.zeros((n_modes, p, N, N))
        levels = np.zeros((n_modes, N))
        amplitude = np.zeros(n_modes)
        kinds = ["west", "east", "calm"]
        for s in range(n_modes):
            kind = kinds[s % 3]
            A1 = np.zeros((N, N))
            if kind == "west":
                A1 += np.diag(np.full(N, 0.5)) + np.diag(np.full(N - 1, 0.35), -1)
                A1[0, 0] = 0.8
                level = 7.0
            elif kind == "east":
                A1 += np.diag(np.full(N, 0.5)) + np.diag(np.full(N - 1, 0.35), 1)
                A1[-1, -1] = 0.8
                level = 5.0
            else:
                A1 += np.diag(np.full(N, 0.75))
                level = 3.0
            A1 += rng.uniform(-0.05, 0.05, size=(N, N))
            coefs[s, 0] = A1
            if p >= 2:
                coefs[s, 1] = np.diag(rng.uniform(0.0, 0.1, size=N)) if kind != "calm" else np.diag(np.full(N, 0.1))
            levels[s] = level + (s // 3) + rng.uniform(-0.5, 0.5, size=N)
            amplitude[s] = 0.3 + 0.2 * (s % 3)
        intercepts = np.zeros((n_modes, 24, N))
        hours = np.arange(24)
        for s in range(n_modes):
            persistence = np.eye(N) - coefs[s].sum(axis=0)
            diurnal = amplitude[s] * np.sin(2 * np.pi * (hours - 9) / 24)
            target = levels[s][None, :] + diurnal[:, None]
            intercepts[s] = target @ persistence.T
        return cls(coefs, intercepts, noise_sd=noise_sd, n_steps=n_steps, seed=seed, **kw)

    def true_coefficients(self, mode: int, offset: float = 0.0) -> np.ndarray:
        """One-step coefficient matrix of regime ``mode`` in design-row layout.

        Columns are the lag blocks (newest first) followed by the 24 hour
        dummies; a panel offset ``c`` shifts the intercepts by ``(I - sum A) c``.
        """
        A = self.coefficients[mode - 1]
        shift = (np.eye(self.n_sites) - A.sum(axis=0)) @ np.full(self.n_sites, offset)
        beta = self.intercepts[mode - 1] + shift[None, :]
        return np.hstack(list(A) + [beta.T])

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients.tolist(),
            "intercepts": self.intercepts.tolist(),
            "noise_sd": self.noise_sd,
            "min_duration": self.min_duration,
            "mean_duration": self.mean_duration,
            "n_steps": self.n_steps,
            "seed": self.seed,
            "start": self.start,
            "sites": list(self.sites),
            "field_variables": list(self.field_variables),
            "field_grid": list(self.field_grid),
            "field_latent_sd": self.field_latent_sd,
            "field_noise_sd": self.field_noise_sd,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        if "coefficients" not in d:
            # compact form: parameters of SynthSpec.default
            return cls.default(**d)
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def gen_mode_path(spec: SynthSpec, seed=None) -> ModeSeries:
    """Semi-Markov regime path of length ``spec.n_steps``."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    M, T = spec.n_modes, spec.n_steps
    start = to_utc(spec.start)
    if M == 1:
        return ModeSeries(start, HOUR, np.ones(T, dtype=np.int64), 1)
    q = 1.0 / (spec.mean_duration - spec.min_duration + 1.0)
    labels = np.empty(T, dtype=np.int64)
    pos, state = 0, int(rng.integers(1, M + 1))
    while pos < T:
        d = spec.min_duration + int(rng.geometric(q)) - 1
        d = min(d, T - pos)
        if d < spec.min_duration and pos > 0:
            # a truncated final event would be too short; extend the previous one
            state = labels[pos - 1]
        labels[pos:pos + d] = state
        pos += d
        others = [m for m in range(1, M + 1) if m != state]
        state = int(others[rng.integers(len(others))])
    return ModeSeries(start, HOUR, labels, M)


def gen_panel(spec: SynthSpec, modes: ModeSeries, seed=None, return_offset=False):
    """Simulate the panel along a given regime path.

    A burn-in of ``10 * p`` steps under the first regime is discarded. If
    any value is negative the whole panel is shifted up by a constant,
    returned as ``offset`` when ``return_offset`` is true.
    """
    rng = np.random.default_rng(spec.seed + 1 if seed is None else seed)
    p, N = spec.p, spec.n_sites
    T = len(modes)
    burn = 10 * p
    labels = np.concatenate([np.full(burn, modes.labels[0]), modes.labels])
    start = to_utc(modes.start)
    first_hour = (start - burn * modes.step).hour
    step_h = int(modes.step / HOUR)
    hours = (first_hour + step_h * np.arange(burn + T)) % 24
    Y = np.zeros((burn + T, N))
    Y[:p] = spec.intercepts[labels[0] - 1].mean(axis=0) @ np.linalg.inv(
        np.eye(N) - spec.coefficients[labels[0] - 1].sum(axis=0)).T
    noise = rng.normal(0.0, spec.noise_sd, size=(burn + T, N)) if spec.noise_sd > 0 else np.zeros((burn + T, N))
    coefs = spec.coefficients
    for t in range(p - 1, burn + T - 1):
        s = labels[t] - 1
        y = spec.intercepts[s, hours[t + 1]] + noise[t + 1]
        for i in range(p):
            y = y + coefs[s, i] @ Y[t - i]
        Y[t + 1] = y
    Y = Y[burn:]
    offset = float(max(0.0, -Y.min()))
    panel = PanelSeries(start, modes.step, spec.sites, Y + offset)
    return (panel, offset) if return_offset else panel


def gen_fields(spec: SynthSpec, modes: ModeSeries, seed=None) -> FieldStack:
    """Gridded fields: regime pattern + smooth latent anomaly + white noise."""
    rng = np.random.default_rng(spec.seed + 2 if seed is None else seed)
    n_lat, n_lon = spec.field_grid
    V = len(spec.field_variables)
    D = V * n_lat * n_lon
    T = len(modes)
    patterns = rng.normal(size=(modes.n_modes, D))
    n_latent = 3
    loadings = rng.normal(size=(D, n_latent))
    phi = 0.98
    shocks = rng.normal(scale=np.sqrt(1 - phi**2), size=(T, n_latent))
    z = np.empty((T, n_latent))
    z[0] = rng.normal(size=n_latent)
    for t in range(1, T):
        z[t] = phi * z[t - 1] + shocks[t]
    data = patterns[modes.labels - 1] + spec.field_latent_sd * z @ loadings.T
    data += rng.normal(scale=spec.field_noise_sd, size=(T, D))
    lat = 50.0 + 0.75 * np.arange(n_lat)
    lon = -5.0 + 0.75 * np.arange(n_lon)
    return FieldStack(modes.start, modes.step, spec.field_variables, lat, lon, data)


@dataclass(eq=False)
class SyntheticData:
    spec: SynthSpec
    modes: ModeSeries
    panel: PanelSeries
    offset: float
    fields: FieldStack | None = field(default=None, repr=False)


def simulate(spec: SynthSpec, with_fields: bool = True) -> SyntheticData:
    """Mode path, panel and (optionally) fields, all seeded from ``spec.seed``."""
    modes = gen_mode_path(spec)
    panel, offset = gen_panel(spec, modes, return_offset=True)
    fields = gen_fields(spec, modes) if with_fields else None
    return SyntheticData(spec, modes, panel, offset, fields)
