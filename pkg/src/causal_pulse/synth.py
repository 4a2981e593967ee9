"""Deterministic synthetic dataset for end-to-end runs.

Generates three small communities over 2018-2020 with known ground
truth: one event injects a +30% week-long lift on the "alpha" platform,
one news entity drives alpha's posting intensity at a two-day lag, and
the term "glimmer" diffuses from alpha to beta with a three-week lag.
Everything is seeded, so regenerating with the same seed reproduces the
files byte for byte.
"""

from __future__ import annotations

import json
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .series import Frequency, TimeSeries
from .io import write_series_csv

START = date(2018, 1, 1)  # a Monday
N_DAYS = 1096

LIFT_EVENT = ("alpha spike", date(2020, 6, 15))
NULL_EVENTS = (("quiet one", date(2019, 9, 10)), ("quiet two", date(2020, 3, 5)))

COMMUNITIES = ("alpha", "beta", "gamma")

_SHARED_WORDS = (
    "river meadow lantern harbor copper orchard signal timber ledger market "
    "bridge garden thunder castle mirror engine violet saddle anchor barrel "
    "canyon draft ember fable granite hollow island jacket kernel lattice "
    "magnet nectar outpost parcel quarry ribbon summit trellis vessel willow"
).split()

_COMMUNITY_WORDS = {
    "alpha": "quartz basalt feldspar gneiss schist pumice obsidian shale marble slate chert flint".split(),
    "beta": "sonnet stanza refrain couplet ballad meter cadence verse elegy ode quatrain rhyme".split(),
    "gamma": "rudder keel mast bowline jib spinnaker tiller transom gunwale halyard cleat winch".split(),
}

DIFFUSING_TERM = "glimmer"
DIFFUSION_LAG_WEEKS = 3


def _ar1(rng: np.random.Generator, n: int, phi: float, sigma: float) -> np.ndarray:
    out = np.zeros(n)
    eps = rng.standard_normal(n) * sigma
    for t in range(1, n):
        out[t] = phi * out[t - 1] + eps[t]
    return out


def _lift_mask(n: int) -> np.ndarray:
    mask = np.ones(n)
    k = (LIFT_EVENT[1] - START).days
    mask[k : k + 7] = 1.3
    return mask


def _daily_frames(rng: np.random.Generator):
    t = np.arange(N_DAYS)
    dow = t % 7
    weekly = np.sin(2 * np.pi * dow / 7.0)
    annual = np.sin(2 * np.pi * t / 365.25)
    return t, weekly, annual


def _series(name: str, values: np.ndarray) -> TimeSeries:
    return TimeSeries(name, Frequency.DAILY, START, values)


def generate_dataset(outdir: str | Path, seed: int = 20240) -> Path:
    """Write the dataset plus its config file; returns the config path."""
    outdir = Path(outdir)
    for sub in ("series", "entities", "posts"):
        (outdir / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    _, weekly, annual = _daily_frames(rng)

    # Latent driver shared by entity_one and alpha's posting intensity.
    driver = _ar1(rng, N_DAYS, phi=0.5, sigma=0.25)
    entity_counts = {
        "entity_one": rng.poisson(np.exp(4.0 + driver)),
        "entity_two": rng.poisson(np.exp(4.0 + _ar1(rng, N_DAYS, 0.6, 0.2))),
        "entity_three": rng.poisson(np.exp(3.5 + _ar1(rng, N_DAYS, 0.4, 0.3))),
    }
    for name, counts in entity_counts.items():
        write_series_csv(_series(name, counts.astype(float)), outdir / "entities" / f"{name}.csv")

    volume = np.exp(6.0 + 0.2 * weekly + 0.05 * _ar1(rng, N_DAYS, 0.7, 1.0))
    write_series_csv(_series("news_volume", volume), outdir / "series" / "news_volume.csv")

    lagged_driver = np.concatenate([np.zeros(2), driver[:-2]])
    base_posters = {"alpha": 33.0, "beta": 20.0, "gamma": 50.0}
    base_ppp = {"alpha": 2.5, "beta": 3.0, "gamma": 2.0}
    series_paths: dict[str, dict[str, str]] = {}
    for community in COMMUNITIES:
        lift = _lift_mask(N_DAYS) if community == "alpha" else np.ones(N_DAYS)
        lam = base_posters[community] * (1 + 0.15 * weekly) * (1 + 0.2 * annual) * lift
        posters = rng.poisson(lam).astype(float)
        ppp = base_ppp[community] + 0.3 * weekly + 0.12 * rng.standard_normal(N_DAYS)
        if community == "alpha":
            ppp = ppp + 0.4 * lagged_driver
        ppp = np.maximum(ppp * lift, 0.1)
        anger = np.clip(0.3 + 0.05 * weekly + 0.04 * _ar1(rng, N_DAYS, 0.6, 1.0), 0.0, 1.0)
        paths = {}
        for metric, values in (("posters", posters), ("posts_per_poster", ppp), ("anger", anger)):
            rel = f"series/{community}_{metric}.csv"
            write_series_csv(_series(metric, values), outdir / rel)
            paths[metric] = rel
        series_paths[community] = paths

    _write_posts(outdir, rng)

    events_rel = "events_synth.csv"
    with open(outdir / events_rel, "w", encoding="utf-8") as fh:
        fh.write("date,name\n")
        for name, day in sorted(NULL_EVENTS + (LIFT_EVENT,), key=lambda e: e[1]):
            fh.write(f"{day.isoformat()},{name}\n")

    config = {
        "data": {
            "posts": {c: f"posts/{c}.jsonl" for c in COMMUNITIES},
            "series": series_paths,
            "entities": {name: f"entities/{name}.csv" for name in entity_counts},
            "news_volume": "series/news_volume.csv",
            "events": events_rel,
            "affect_labels": ["anger"],
        },
        "analyses": ["impact", "granger_news", "diffusion", "lexicon", "placebo"],
        "params": {"top_k": 25, "min_freq": 20, "mc_draws": 4000, "seed": 11},
        "output_dir": "out",
    }
    config_path = outdir / "config_synth.json"
    config_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return config_path


def _write_posts(outdir: Path, rng: np.random.Generator) -> None:
    n_weeks = (N_DAYS + 6) // 7
    glimmer_level = _ar1(rng, n_weeks, phi=0.7, sigma=0.8)
    p_alpha = np.clip(0.3 + 0.15 * glimmer_level, 0.05, 0.9)
    lagged = np.concatenate([np.full(DIFFUSION_LAG_WEEKS, glimmer_level[0]),
                             glimmer_level[:-DIFFUSION_LAG_WEEKS]])
    p_beta = np.clip(0.3 + 0.15 * lagged, 0.05, 0.9)
    p_term = {"alpha": p_alpha, "beta": p_beta, "gamma": np.full(n_weeks, 0.12)}

    shared_weights = 1.0 / np.arange(1, len(_SHARED_WORDS) + 1) ** 0.7
    shared_weights /= shared_weights.sum()
    fillers = ("the", "and", "of", "to", "in", "a", "is", "was", "for", "with")

    for community in COMMUNITIES:
        own_words = _COMMUNITY_WORDS[community]
        with open(outdir / "posts" / f"{community}.jsonl", "w", encoding="utf-8") as fh:
            for day_idx in range(N_DAYS):
                day = START + timedelta(days=day_idx)
                week = day_idx // 7
                for post_idx in range(6):
                    words = list(rng.choice(_SHARED_WORDS, size=8, p=shared_weights))
                    words += list(rng.choice(own_words, size=2))
                    words += list(rng.choice(fillers, size=3))
                    if rng.random() < p_term[community][week]:
                        words.append(DIFFUSING_TERM)
                    if community == "alpha" and rng.random() < 0.15:
                        words += ["stone", "circle"]
                    order = rng.permutation(len(words))
                    text = " ".join(words[i] for i in order)
                    record = {
                        "author": f"{community}_user_{int(rng.integers(0, 60))}",
                        "timestamp": f"{day.isoformat()}T{9 + post_idx * 2:02d}:15:00+00:00",
                        "text": text,
                        "scores": {"anger": round(float(np.clip(rng.normal(0.3, 0.1), 0, 1)), 4)},
                    }
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
