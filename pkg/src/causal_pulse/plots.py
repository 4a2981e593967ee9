"""Deterministic SVG rendering of impact panels.

Two stacked panels per event: observed vs counterfactual with the 99%
band on top, the pointwise difference with its band below. Output is
plain hand-assembled SVG with fixed float formatting, so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

WIDTH = 840
PANEL_HEIGHT = 220
MARGIN_LEFT = 64
MARGIN_RIGHT = 16
MARGIN_TOP = 28
PANEL_GAP = 40
MARGIN_BOTTOM = 36

_OBSERVED = "#1f3d7a"
_FORECAST = "#c04a1d"
_BAND = "#f2c9b4"
_GRID = "#d8d8d8"


@dataclass(frozen=True, eq=False)
class ImpactPlotData:
    """Everything needed to draw one event panel pair."""

    title: str
    dates: list[date]
    observed: np.ndarray
    predicted: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    post_start: int


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _scale(values: np.ndarray, lo_px: float, hi_px: float) -> tuple[float, float]:
    finite = values[np.isfinite(values)]
    vmin, vmax = float(finite.min()), float(finite.max())
    if vmax == vmin:
        vmax = vmin + 1.0
    pad = 0.06 * (vmax - vmin)
    vmin, vmax = vmin - pad, vmax + pad
    span = vmax - vmin
    return vmin, (hi_px - lo_px) / span


def _polyline(xs, ys, color: str, width: float = 1.5, dash: str = "") -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{dash_attr} '
        f'points="{pts}"/>'
    )


def _band(xs, lo_ys, hi_ys, color: str) -> str:
    ring = list(zip(xs, hi_ys)) + list(zip(xs[::-1], lo_ys[::-1]))
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in ring)
    return f'<polygon fill="{color}" fill-opacity="0.55" stroke="none" points="{pts}"/>'


def _panel(
    top: float,
    xs: np.ndarray,
    series: list[tuple[np.ndarray, str, float, str]],
    band: tuple[np.ndarray, np.ndarray] | None,
    label: str,
    zero_line: bool,
    event_x: float,
) -> list[str]:
    bottom = top + PANEL_HEIGHT
    stacked = [arr for arr, *_ in series]
    if band is not None:
        stacked.extend(band)
    vmin, scale = _scale(np.concatenate(stacked), 0, PANEL_HEIGHT)

    def to_y(vals: np.ndarray) -> np.ndarray:
        clipped = np.clip(vals, vmin, vmin + PANEL_HEIGHT / scale)
        return bottom - (clipped - vmin) * scale

    parts = [
        f'<rect x="{MARGIN_LEFT}" y="{_fmt(top)}" width="{WIDTH - MARGIN_LEFT - MARGIN_RIGHT}" '
        f'height="{PANEL_HEIGHT}" fill="none" stroke="{_GRID}"/>'
    ]
    if band is not None:
        parts.append(_band(xs, to_y(band[0]), to_y(band[1]), _BAND))
    if zero_line and vmin < 0 < vmin + PANEL_HEIGHT / scale:
        zy = _fmt(bottom + vmin * scale)
        parts.append(
            f'<line x1="{MARGIN_LEFT}" y1="{zy}" x2="{WIDTH - MARGIN_RIGHT}" y2="{zy}" '
            f'stroke="{_GRID}" stroke-width="1"/>'
        )
    for arr, color, width, dash in series:
        parts.append(_polyline(xs, to_y(arr), color, width, dash))
    parts.append(
        f'<line x1="{_fmt(event_x)}" y1="{_fmt(top)}" x2="{_fmt(event_x)}" y2="{_fmt(bottom)}" '
        f'stroke="#777777" stroke-width="1" stroke-dasharray="4 3"/>'
    )
    for frac, value in ((0.0, vmin + PANEL_HEIGHT / scale), (1.0, vmin)):
        y = top + frac * PANEL_HEIGHT
        parts.append(
            f'<text x="{MARGIN_LEFT - 6}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-size="11" fill="#444444">{_fmt(value)}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_LEFT}" y="{_fmt(top - 7)}" font-size="12" '
        f'fill="#222222">{label}</text>'
    )
    return parts


def render_impact_svg(data: ImpactPlotData) -> str:
    """Compose the two-panel SVG document as a string."""
    n = len(data.observed)
    height = MARGIN_TOP + 2 * PANEL_HEIGHT + PANEL_GAP + MARGIN_BOTTOM
    xs = MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) * np.arange(n) / max(n - 1, 1)
    event_x = float(xs[data.post_start]) if data.post_start < n else float(xs[-1])

    diff = data.observed - data.predicted
    diff_lo = data.lower - data.predicted
    diff_hi = data.upper - data.predicted

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}">',
        f'<rect width="{WIDTH}" height="{height}" fill="#ffffff"/>',
        f'<text x="{MARGIN_LEFT}" y="18" font-size="14" fill="#000000">{_escape(data.title)}</text>',
    ]
    parts += _panel(
        MARGIN_TOP + 14,
        xs,
        [(data.observed, _OBSERVED, 1.6, ""), (data.predicted, _FORECAST, 1.4, "5 3")],
        (data.lower, data.upper),
        "observed vs counterfactual (99% band)",
        zero_line=False,
        event_x=event_x,
    )
    parts += _panel(
        MARGIN_TOP + 14 + PANEL_HEIGHT + PANEL_GAP,
        xs,
        [(diff, _OBSERVED, 1.6, "")],
        (diff_lo, diff_hi),
        "pointwise difference",
        zero_line=True,
        event_x=event_x,
    )
    first, last = data.dates[0].isoformat(), data.dates[-1].isoformat()
    y_axis = height - 12
    parts.append(
        f'<text x="{MARGIN_LEFT}" y="{y_axis}" font-size="11" fill="#444444">{first}</text>'
    )
    parts.append(
        f'<text x="{WIDTH - MARGIN_RIGHT}" y="{y_axis}" text-anchor="end" font-size="11" '
        f'fill="#444444">{last}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_impact_svg(data: ImpactPlotData, path: str | Path) -> None:
    Path(path).write_text(render_impact_svg(data), encoding="utf-8")
