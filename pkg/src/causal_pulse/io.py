"""Readers and writers for the on-disk formats the pipeline consumes.

Posts arrive as JSON lines (``author``, ``timestamp``, ``text``, optional
``scores``); series as two-column CSV (``date,value``, empty cell means
missing); events as ``date,name`` CSV. All series outputs use the same
CSV shape.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import IngestError
from .series import Frequency, PostRecord, TimeSeries


@dataclass(frozen=True)
class EventSpec:
    """A named calendar date treated as a once-off intervention."""

    name: str
    date: date


def _parse_timestamp(raw: str) -> datetime:
    # RFC 3339; Python 3.10's fromisoformat does not accept a Z suffix.
    text = raw.replace("Z", "+00:00") if raw.endswith("Z") else raw
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def read_posts_jsonl(
    path: str | Path, window: tuple[date, date] | None = None
) -> list[PostRecord]:
    """Parse a JSON-lines posts file.

    Malformed records raise :class:`IngestError` with their line number.
    When a window is given, records outside it are dropped so that every
    returned record satisfies the observation-window invariant.
    """
    records: list[PostRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"invalid JSON ({exc.msg})", line=lineno) from exc
            try:
                author = str(obj["author"])
                ts = _parse_timestamp(str(obj["timestamp"]))
                text = str(obj.get("text", ""))
            except KeyError as exc:
                raise IngestError(f"missing field {exc.args[0]!r}", line=lineno) from exc
            except ValueError as exc:
                raise IngestError(f"malformed timestamp: {exc}", line=lineno) from exc
            scores = obj.get("scores")
            if scores is not None:
                try:
                    scores = {str(k): float(v) for k, v in scores.items()}
                except (TypeError, ValueError, AttributeError) as exc:
                    raise IngestError(f"malformed scores object: {exc}", line=lineno) from exc
            try:
                record = PostRecord(author=author, timestamp=ts, text=text, scores=scores)
            except ValueError as exc:
                raise IngestError(str(exc), line=lineno) from exc
            if window is not None:
                day = record.day
                if not (window[0] <= day <= window[1]):
                    continue
            records.append(record)
    return records


def read_series_csv(path: str | Path, name: str | None = None) -> TimeSeries:
    """Read a ``date,value`` CSV as a daily series.

    Dates must be strictly increasing; days absent from the file, like
    empty value cells, become missing observations.
    """
    rows: list[tuple[date, float]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["date", "value"]:
            raise IngestError(f"{path}: expected header 'date,value'", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or not row[0].strip():
                continue
            try:
                day = date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise IngestError(f"bad date {row[0]!r}", line=lineno) from exc
            cell = row[1].strip() if len(row) > 1 else ""
            if cell == "":
                value = float("nan")
            else:
                try:
                    value = float(cell)
                except ValueError as exc:
                    raise IngestError(f"bad value {cell!r}", line=lineno) from exc
            if rows and day <= rows[-1][0]:
                raise IngestError(f"dates not strictly increasing at {day}", line=lineno)
            rows.append((day, value))
    if not rows:
        raise IngestError(f"{path}: no data rows")
    start = rows[0][0]
    n = (rows[-1][0] - start).days + 1
    values = np.full(n, np.nan)
    for day, value in rows:
        values[(day - start).days] = value
    return TimeSeries(name or Path(path).stem, Frequency.DAILY, start, values)


def write_series_csv(series: TimeSeries, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "value"])
        for k, value in enumerate(series.values):
            cell = "" if np.isnan(value) else repr(float(value))
            writer.writerow([series.date_at(k).isoformat(), cell])


def read_events_csv(path: str | Path) -> list[EventSpec]:
    """Read a ``date,name`` CSV of events."""
    events: list[EventSpec] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["date", "name"]:
            raise IngestError(f"{path}: expected header 'date,name'", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or not row[0].strip():
                continue
            try:
                day = date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise IngestError(f"bad date {row[0]!r}", line=lineno) from exc
            name = row[1].strip() if len(row) > 1 else ""
            if not name:
                raise IngestError("event name is empty", line=lineno)
            events.append(EventSpec(name=name, date=day))
    return events


def read_stopwords(path: str | Path) -> frozenset[str]:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word and not word.startswith("#"):
                words.add(word)
    return frozenset(words)


def bundled_events() -> list[EventSpec]:
    """The event list shipped with the package."""
    with resources.as_file(resources.files("causal_pulse.data") / "events.csv") as p:
        return read_events_csv(p)


def bundled_stopwords() -> frozenset[str]:
    """The default stopword list shipped with the package."""
    with resources.as_file(resources.files("causal_pulse.data") / "stopwords.txt") as p:
        return read_stopwords(p)
