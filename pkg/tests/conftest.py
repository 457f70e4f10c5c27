from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from cvarwind.data import HOUR, ModeSeries, PanelSeries
from cvarwind.regimes import ModeClassifier
from cvarwind.synth import SynthSpec, simulate

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
START = "2002-01-01T00:00:00Z"

# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def make_panel(values, start=START, step=HOUR, sites=None) -> PanelSeries:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    sites = sites or [f"s{n}" for n in range(values.shape[1])]
    return PanelSeries(start, step, tuple(sites), values)


def make_modes(labels, start=START, step=HOUR, n_modes=0) -> ModeSeries:
    return ModeSeries(start, step, np.asarray(labels, dtype=np.int64), n_modes)


def random_panel(rng, T=400, N=3, start=START) -> PanelSeries:
    """Positive AR(1)-ish panel with a diurnal cycle."""
    y = np.empty((T, N))
    y[0] = 5.0
    hours = np.arange(T) % 24
    for t in range(1, T):
        y[t] = 1.5 + 0.7 * y[t - 1] + 0.3 * np.sin(2 * np.pi * hours[t] / 24) + rng.normal(0, 0.3, N)
    return make_panel(np.abs(y), start=start)


def random_modes(rng, T, M, min_run=3) -> ModeSeries:
    labels = []
    while len(labels) < T:
        labels += [int(rng.integers(1, M + 1))] * int(rng.integers(min_run, 3 * min_run))
    labels = np.array(labels[:T])
    labels[:M] = np.arange(1, M + 1)  # every mode present
    return make_modes(labels, n_modes=M)


@pytest.fixture(scope="session")
def fixture_spec() -> SynthSpec:
    """The shipped synthetic fixture: N=4, M=3, p=2, sd=0.1, T=50,000."""
    return SynthSpec.load(FIXTURES / "synth_spec.json")


@pytest.fixture(scope="session")
def fixture_data(fixture_spec):
    return simulate(fixture_spec)


@pytest.fixture(scope="session")
def fixture_classifier(fixture_data):
    return ModeClassifier(n_modes=3, n_modes_range=range(1, 7), random_state=0).fit(fixture_data.fields)


@pytest.fixture(scope="session")
def fixture_config() -> dict:
    return json.loads((FIXTURES / "config.json").read_text())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")

