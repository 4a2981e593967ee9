"""Shared fixtures: series builders, simulators and the synthetic run."""

from __future__ import annotations

from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np
import pytest

from causal_pulse.config import load_config
from causal_pulse.pipeline import run_analyses
from causal_pulse.series import Frequency, PostRecord, TimeSeries
from causal_pulse.synth import generate_dataset

MONDAY = date(2018, 1, 1)  # a Monday, start of an ISO week


def daily(values, start=MONDAY, name="series") -> TimeSeries:
    return TimeSeries(name, Frequency.DAILY, start, np.asarray(values, dtype=float))


def post(author: str, day: date, text: str = "", scores=None, hour: int = 12) -> PostRecord:
    ts = datetime(day.year, day.month, day.day, hour, tzinfo=timezone.utc)
    return PostRecord(author=author, timestamp=ts, text=text, scores=scores)


def simulate_var1(rng, n, a1, sigma=1.0):
    """Bivariate VAR(1) sample path from zero initial conditions."""
    y = np.zeros((n, 2))
    shocks = rng.standard_normal((n, 2)) * sigma
    for t in range(1, n):
        y[t] = a1 @ y[t - 1] + shocks[t]
    return y


def simulate_var2(rng, n, a1, a2, sigma=1.0):
    y = np.zeros((n, 2))
    shocks = rng.standard_normal((n, 2)) * sigma
    for t in range(2, n):
        y[t] = a1 @ y[t - 1] + a2 @ y[t - 2] + shocks[t]
    return y


def simulate_coupled(rng, n, coupling=0.4, own=0.5):
    """x white noise driving y at lag one; returns columns (x, y)."""
    x = rng.standard_normal(n)
    y = np.zeros(n)
    eps = rng.standard_normal(n)
    for t in range(1, n):
        y[t] = own * y[t - 1] + coupling * x[t - 1] + eps[t]
    return np.column_stack([x, y])


@pytest.fixture(scope="session")
def synth_dataset(tmp_path_factory) -> Path:
    """The bundled synthetic dataset, generated once per test session."""
    root = tmp_path_factory.mktemp("synth")
    return generate_dataset(root, seed=20240)


@pytest.fixture(scope="session")
def synth_run(synth_dataset):
    """One full pipeline run on the synthetic dataset (jobs=1)."""
    outdir = synth_dataset.parent / "out_base"
    config = load_config(synth_dataset, out_override=str(outdir))
    sections = run_analyses(config, jobs=1)
    return config, sections, outdir
