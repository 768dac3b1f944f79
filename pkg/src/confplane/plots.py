"""Batch plot output: CSV tables and SVG heatmaps written as plain text."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .field import ScalarGrid

MAX_CELLS = 128


def write_csv(path: str | Path, rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)


def _color(t: float, diverging: bool) -> str:
    # t in [0, 1]; diverging maps 0.5 to white
    if diverging:
        if t < 0.5:
            s = t / 0.5
            r, g, b = s, s, 1.0
        else:
            s = (1.0 - t) / 0.5
            r, g, b = 1.0, s, s
    else:
        r, g, b = t, t * t, 0.25 + 0.5 * (1.0 - t)
    return "#%02x%02x%02x" % tuple(int(round(255 * c)) for c in (r, g, b))


def heatmap_svg(grid: ScalarGrid, title: str = "", cell: int = 4, diverging: bool = True) -> str:
    """SVG heatmap of a grid, downsampled to at most ``MAX_CELLS`` per side.

    Invalid nodes are drawn grey.  With ``diverging`` the color scale is
    symmetric about zero.
    """
    step = max(1, math.ceil(grid.n / MAX_CELLS))
    vals = grid.values[::step, ::step]
    valid = grid.valid[::step, ::step]
    m = vals.shape[0]
    finite = vals[valid & np.isfinite(vals)]
    if finite.size == 0:
        lo, hi = 0.0, 1.0
    elif diverging:
        a = float(np.max(np.abs(finite))) or 1.0
        lo, hi = -a, a
    else:
        lo, hi = float(finite.min()), float(finite.max())
        if hi == lo:
            hi = lo + 1.0
    size = m * cell
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 20}" '
        f'viewBox="0 0 {size} {size + 20}">',
        f'<text x="2" y="14" font-family="monospace" font-size="11">{title} '
        f"[{lo:.4g}, {hi:.4g}]</text>",
    ]
    for j in range(m):
        y = 20 + (m - 1 - j) * cell  # y increases upwards
        for i in range(m):
            v = vals[j, i]
            if not valid[j, i] or not np.isfinite(v):
                color = "#888888"
            else:
                color = _color(min(max((v - lo) / (hi - lo), 0.0), 1.0), diverging)
            out.append(f'<rect x="{i * cell}" y="{y}" width="{cell}" height="{cell}" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_heatmap(path: str | Path, grid: ScalarGrid, title: str = "", diverging: bool = True) -> None:
    Path(path).write_text(heatmap_svg(grid, title, diverging=diverging), encoding="utf-8")
