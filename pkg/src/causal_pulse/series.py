"""Calendar-indexed series and the deterministic transforms applied to them.

Everything in the analysis pipeline flows through :class:`TimeSeries`: a
named, contiguously indexed sequence of real values at daily or weekly
frequency, with ``NaN`` marking missing observations. Weekly series are
indexed by the Monday of each ISO week.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from enum import Enum

import numpy as np

from .errors import AlignmentError, ConfigError, InsufficientDataError, TransformError

WEEKDAY_LABELS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")

# Monday is the omitted baseline, so dummies cover Tuesday..Sunday.
DOW_DUMMY_LABELS = tuple(f"dow_{d}" for d in WEEKDAY_LABELS[1:])


class Frequency(str, Enum):
    DAILY = "daily"
    WEEKLY = "weekly"

    @property
    def step(self) -> timedelta:
        return timedelta(days=1 if self is Frequency.DAILY else 7)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A named series with a gap-free calendar index.

    ``values[k]`` is the observation for ``start + k`` periods. Missing
    observations are ``NaN``; the index itself never has holes.
    """

    name: str
    frequency: Frequency
    start: date
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("series values must be one-dimensional")
        if len(vals) == 0:
            raise ValueError(f"series {self.name!r} is empty")
        if self.frequency is Frequency.WEEKLY and self.start.weekday() != 0:
            raise ValueError("weekly series must start on a Monday (ISO week)")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> date:
        """Date of the last observation."""
        return self.date_at(len(self) - 1)

    def date_at(self, k: int) -> date:
        return self.start + k * self.frequency.step

    def index_of(self, day: date) -> int:
        delta = (day - self.start).days
        step = self.frequency.step.days
        if delta % step != 0:
            raise ValueError(f"{day} is not on the {self.frequency.value} grid of {self.name!r}")
        k = delta // step
        if not 0 <= k < len(self):
            raise ValueError(f"{day} outside the range of {self.name!r} ({self.start}..{self.end})")
        return k

    def covers(self, first: date, last: date) -> bool:
        return self.start <= first and last <= self.end

    def window(self, first: date, last: date) -> "TimeSeries":
        """Sub-series for the inclusive date range ``[first, last]``."""
        if not self.covers(first, last):
            raise AlignmentError(
                f"{self.name!r} covers {self.start}..{self.end}, requested {first}..{last}"
            )
        i, j = self.index_of(first), self.index_of(last)
        return self.replace(values=self.values[i : j + 1], start=first)

    def replace(self, values=None, start: date | None = None, name: str | None = None) -> "TimeSeries":
        return TimeSeries(
            name=self.name if name is None else name,
            frequency=self.frequency,
            start=self.start if start is None else start,
            values=self.values if values is None else values,
        )

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())

    def dates(self) -> list[date]:
        return [self.date_at(k) for k in range(len(self))]


@dataclass(frozen=True)
class PostRecord:
    """One ingested post: opaque author, UTC timestamp, text, optional scores."""

    author: str
    timestamp: datetime
    text: str
    scores: Mapping[str, float] | None = None

    def __post_init__(self):
        if not self.author:
            raise ValueError("post author must be non-empty")
        if self.timestamp.tzinfo is None:
            raise ValueError("post timestamp must be timezone-aware")

    @property
    def day(self) -> date:
        return self.timestamp.astimezone(timezone.utc).date()


TRANSFORM_STEPS = ("locf", "log1p", "log", "first_difference", "weekly_aggregate")


@dataclass(frozen=True)
class TransformSpec:
    """An ordered list of transform steps.

    At most one differencing step is allowed, and a log step must precede
    it when both are present (differences of logs, never logs of
    differences).
    """

    steps: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        for s in self.steps:
            if s not in TRANSFORM_STEPS:
                raise ValueError(f"unknown transform step {s!r}; expected one of {TRANSFORM_STEPS}")
        diffs = [i for i, s in enumerate(self.steps) if s == "first_difference"]
        if len(diffs) > 1:
            raise ValueError("at most one differencing step is allowed")
        logs = [i for i, s in enumerate(self.steps) if s in ("log", "log1p")]
        if diffs and logs and min(logs) > diffs[0]:
            raise ValueError("log steps must precede differencing")


def locf(series: TimeSeries) -> TimeSeries:
    """Replace each missing value with the most recent present one."""
    vals = series.values
    if np.isnan(vals[0]):
        raise TransformError(f"untransformable: leading gap in {series.name!r}")
    out = vals.copy()
    mask = np.isnan(out)
    idx = np.where(~mask, np.arange(len(out)), 0)
    np.maximum.accumulate(idx, out=idx)
    out[mask] = out[idx[mask]]
    return series.replace(values=out)


def log_transform(series: TimeSeries) -> TimeSeries:
    vals = series.values
    present = vals[~np.isnan(vals)]
    if len(present) and present.min() <= 0:
        raise TransformError(f"log of non-positive value in {series.name!r}")
    with np.errstate(invalid="ignore"):
        return series.replace(values=np.log(vals))


def log1p_transform(series: TimeSeries) -> TimeSeries:
    vals = series.values
    present = vals[~np.isnan(vals)]
    if len(present) and present.min() < 0:
        raise TransformError(f"log1p of negative value in {series.name!r}")
    with np.errstate(invalid="ignore"):
        return series.replace(values=np.log1p(vals))


def first_difference(series: TimeSeries) -> TimeSeries:
    """v_t -> v_t - v_{t-1}; shortens the series by one period."""
    if len(series) < 2:
        raise InsufficientDataError(f"cannot difference a length-{len(series)} series")
    vals = np.diff(series.values)
    return series.replace(values=vals, start=series.date_at(1))


def weekly_aggregate(series: TimeSeries, reducer: str = "sum") -> TimeSeries:
    """Aggregate a daily series to ISO weeks (Monday start).

    Partial first/last weeks are dropped. The reducer is applied over the
    present values of each week; a week is missing only if all seven days
    are missing.
    """
    if series.frequency is not Frequency.DAILY:
        raise TransformError("weekly aggregation requires a daily series")
    if reducer not in ("sum", "mean"):
        raise ValueError(f"unknown reducer {reducer!r}")
    first_monday = series.start + timedelta(days=(7 - series.start.weekday()) % 7)
    n_weeks = ((series.end - first_monday).days + 1) // 7
    if n_weeks < 1:
        raise InsufficientDataError(
            f"{series.name!r} spans no complete ISO week ({series.start}..{series.end})"
        )
    offset = (first_monday - series.start).days
    block = series.values[offset : offset + 7 * n_weeks].reshape(n_weeks, 7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        agg = np.nansum(block, axis=1) if reducer == "sum" else np.nanmean(block, axis=1)
    all_missing = np.isnan(block).all(axis=1)
    agg = np.where(all_missing, np.nan, agg)
    return TimeSeries(series.name, Frequency.WEEKLY, first_monday, agg)


_STEP_FUNCS = {
    "locf": locf,
    "log": log_transform,
    "log1p": log1p_transform,
    "first_difference": first_difference,
    "weekly_aggregate": weekly_aggregate,
}


def apply_transforms(series: TimeSeries, spec: TransformSpec) -> TimeSeries:
    """Apply the spec's steps in order, returning a new series."""
    out = series
    for step in spec.steps:
        out = _STEP_FUNCS[step](out)
    return out


def compute_engagement(
    posts: Sequence[PostRecord], window: tuple[date, date]
) -> tuple[TimeSeries, TimeSeries]:
    """Daily engagement signals over an inclusive date window.

    Returns ``(posters, posts_per_poster)`` where ``posters[d]`` counts
    distinct authors on day ``d`` and ``posts_per_poster[d]`` is the post
    count divided by it, missing on days with no posters.
    """
    first, last = window
    if last < first:
        raise ValueError(f"empty window {first}..{last}")
    n = (last - first).days + 1
    authors: list[set[str]] = [set() for _ in range(n)]
    counts = np.zeros(n)
    for post in posts:
        k = (post.day - first).days
        if 0 <= k < n:
            authors[k].add(post.author)
            counts[k] += 1
    n_posters = np.array([float(len(a)) for a in authors])
    with np.errstate(divide="ignore", invalid="ignore"):
        per_poster = np.where(n_posters > 0, counts / np.where(n_posters > 0, n_posters, 1), np.nan)
    if counts.sum() == 0:
        warnings.warn(f"no posts fall inside {first}..{last}", stacklevel=2)
    return (
        TimeSeries("posters", Frequency.DAILY, first, n_posters),
        TimeSeries("posts_per_poster", Frequency.DAILY, first, per_poster),
    )


def compute_affect_series(
    posts: Sequence[PostRecord], label: str, window: tuple[date, date]
) -> TimeSeries:
    """Daily unweighted mean of the per-post scores for one label."""
    first, last = window
    if last < first:
        raise ValueError(f"empty window {first}..{last}")
    available: set[str] = set()
    n = (last - first).days + 1
    sums = np.zeros(n)
    counts = np.zeros(n)
    for post in posts:
        if post.scores:
            available.update(post.scores)
            if label in post.scores:
                k = (post.day - first).days
                if 0 <= k < n:
                    sums[k] += post.scores[label]
                    counts[k] += 1
    if counts.sum() == 0:
        raise ConfigError(
            f"no post carries a score for {label!r}; available labels: "
            f"{sorted(available) if available else 'none'}"
        )
    with np.errstate(invalid="ignore"):
        vals = np.where(counts > 0, sums / np.where(counts > 0, counts, 1), np.nan)
    return TimeSeries(label, Frequency.DAILY, first, vals)


@dataclass(frozen=True, eq=False)
class ExogenousBlock:
    """Regressor columns aligned row-for-row to a daily calendar index.

    Columns are six day-of-week dummies (Monday is the omitted baseline)
    followed by log-transformed total news volume.
    """

    start: date
    labels: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[1] != len(self.labels):
            raise ValueError("exogenous matrix shape does not match labels")
        object.__setattr__(self, "matrix", mat)

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]

    @property
    def end(self) -> date:
        return self.start + timedelta(days=len(self) - 1)

    def window(self, first: date, last: date) -> "ExogenousBlock":
        if not (self.start <= first and last <= self.end):
            raise AlignmentError(
                f"exogenous block covers {self.start}..{self.end}, requested {first}..{last}"
            )
        i = (first - self.start).days
        j = (last - self.start).days
        return ExogenousBlock(first, self.labels, self.matrix[i : j + 1])


def day_of_week_dummies(first: date, n_days: int) -> np.ndarray:
    """(n, 6) dummy matrix, Tuesday..Sunday columns, Monday all-zero."""
    rows = np.zeros((n_days, 6))
    for k in range(n_days):
        wd = (first + timedelta(days=k)).weekday()
        if wd > 0:
            rows[k, wd - 1] = 1.0
    return rows


def build_exogenous(window: tuple[date, date], news_volume: TimeSeries) -> ExogenousBlock:
    """Day-of-week dummies plus ln(1+volume), LOCF-imputed, over a window."""
    first, last = window
    vol = locf(news_volume)
    if not vol.covers(first, last):
        missing_from = max(vol.end + timedelta(days=1), first) if vol.end < last else first
        missing = []
        if first < vol.start:
            missing.append(f"{first}..{min(last, vol.start - timedelta(days=1))}")
        if vol.end < last:
            missing.append(f"{missing_from}..{last}")
        raise AlignmentError(
            f"news volume does not cover {first}..{last}; missing {', '.join(missing)}"
        )
    sliced = vol.window(first, last)
    if sliced.has_missing:
        gaps = [str(sliced.date_at(k)) for k in np.flatnonzero(np.isnan(sliced.values))]
        raise AlignmentError(f"news volume still missing after imputation on: {', '.join(gaps)}")
    n = len(sliced)
    mat = np.column_stack([day_of_week_dummies(first, n), np.log1p(sliced.values)])
    return ExogenousBlock(first, DOW_DUMMY_LABELS + ("log_news_volume",), mat)
