"""Deterministic CSV and SVG rendering of daily series.

Both writers are plain text, byte-for-byte reproducible for identical
input: no timestamps, fixed formatting, LF line endings.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

__all__ = ["emit_csv", "emit_svg"]

VIEW_WIDTH = 800
VIEW_HEIGHT = 500
MARGIN_LEFT = 64
MARGIN_RIGHT = 16
MARGIN_TOP = 24
MARGIN_BOTTOM = 44

PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]


def _format_value(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.6f}"


def emit_csv(series: list[tuple[str, np.ndarray]], path: str | Path) -> None:
    """Write labelled day series side by side: day column first.

    All series must share the day axis; the first series is conventionally
    the baseline.
    """
    if not series:
        raise ValueError("nothing to write")
    length = len(series[0][1])
    for label, values in series:
        if len(values) != length:
            raise ValueError(f"series {label!r} does not share the day axis")
    lines = ["day," + ",".join(label for label, _ in series)]
    for day in range(length):
        row = [str(day)] + [_format_value(values[day]) for _, values in series]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def _x_of(day: int, days: int) -> float:
    span = VIEW_WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    return MARGIN_LEFT + span * (day / max(days - 1, 1))


def _y_of(value: float, top: float) -> float:
    span = VIEW_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    return VIEW_HEIGHT - MARGIN_BOTTOM - span * (value / top if top > 0 else 0.0)


def emit_svg(
    series: list[tuple[str, np.ndarray]],
    path: str | Path,
    band: tuple[str, str] | None = None,
    title: str = "daily new infected",
) -> None:
    """Line chart of the series set; optional shaded band between two of
    them (by label), used to show the gap a measure opens up."""
    if not series:
        raise ValueError("nothing to draw")
    days = len(series[0][1])
    top = max(float(np.max(values)) for _, values in series)
    top = top if top > 0 else 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{VIEW_WIDTH}" '
        f'height="{VIEW_HEIGHT}" viewBox="0 0 {VIEW_WIDTH} {VIEW_HEIGHT}">',
        f'<rect width="{VIEW_WIDTH}" height="{VIEW_HEIGHT}" fill="white"/>',
        f'<text x="{MARGIN_LEFT}" y="16" font-family="monospace" '
        f'font-size="13">{title}</text>',
    ]
    if band is not None:
        labels = [label for label, _ in series]
        upper = series[labels.index(band[0])][1]
        lower = series[labels.index(band[1])][1]
        points = [
            f"{_x_of(d, days):.2f},{_y_of(float(upper[d]), top):.2f}" for d in range(days)
        ] + [
            f"{_x_of(d, days):.2f},{_y_of(float(lower[d]), top):.2f}"
            for d in reversed(range(days))
        ]
        parts.append(
            f'<polygon points="{" ".join(points)}" fill="#cccccc" '
            f'fill-opacity="0.6" stroke="none"/>'
        )
    axis_y = VIEW_HEIGHT - MARGIN_BOTTOM
    parts.append(
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" '
        f'y2="{axis_y}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{MARGIN_LEFT}" y1="{axis_y}" x2="{VIEW_WIDTH - MARGIN_RIGHT}" '
        f'y2="{axis_y}" stroke="black"/>'
    )
    parts.append(
        f'<text x="{MARGIN_LEFT}" y="{axis_y + 16}" font-family="monospace" '
        f'font-size="11">day 0</text>'
    )
    parts.append(
        f'<text x="{VIEW_WIDTH - MARGIN_RIGHT - 60}" y="{axis_y + 16}" '
        f'font-family="monospace" font-size="11">day {days - 1}</text>'
    )
    parts.append(
        f'<text x="4" y="{MARGIN_TOP + 10}" font-family="monospace" '
        f'font-size="11">{_format_value(math.ceil(top))}</text>'
    )
    for index, (label, values) in enumerate(series):
        color = PALETTE[index % len(PALETTE)]
        points = " ".join(
            f"{_x_of(d, days):.2f},{_y_of(float(values[d]), top):.2f}"
            for d in range(days)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        legend_y = MARGIN_TOP + 14 * index + 10
        parts.append(
            f'<rect x="{VIEW_WIDTH - 190}" y="{legend_y - 9}" width="10" '
            f'height="10" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{VIEW_WIDTH - 176}" y="{legend_y}" font-family="monospace" '
            f'font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", newline="\n")
