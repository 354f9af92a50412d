"""Dependency-free SVG scatter plots for 2-D point sets."""

from __future__ import annotations

import numpy as np

_WIDTH = 480
_HEIGHT = 480
_MARGIN = 40
_COLOR_A = "#4878cf"
_COLOR_B = "#d65f5f"


def _bounds(points: list[np.ndarray]) -> tuple[float, float, float, float]:
    stacked = [p for p in points if p.size]
    if not stacked:
        return -1.0, 1.0, -1.0, 1.0
    allp = np.vstack(stacked)
    x0, y0 = allp.min(axis=0)
    x1, y1 = allp.max(axis=0)
    pad_x = 0.05 * (x1 - x0) or 1.0
    pad_y = 0.05 * (y1 - y0) or 1.0
    return x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y


def emit_scatter_svg(points_a: np.ndarray, points_b: np.ndarray, path, label_a="reference", label_b="generated"):
    """Write a standalone SVG overlaying two 2-D point sets with a legend.

    Output is byte-deterministic for fixed inputs; empty sets yield a valid
    SVG with an empty plot area.
    """
    points_a = np.asarray(points_a, dtype=float).reshape(-1, 2) if np.size(points_a) else np.empty((0, 2))
    points_b = np.asarray(points_b, dtype=float).reshape(-1, 2) if np.size(points_b) else np.empty((0, 2))
    x0, x1, y0, y1 = _bounds([points_a, points_b])
    span_x = _WIDTH - 2 * _MARGIN
    span_y = _HEIGHT - 2 * _MARGIN

    def sx(x: float) -> float:
        return _MARGIN + span_x * (x - x0) / (x1 - x0)

    def sy(y: float) -> float:
        return _HEIGHT - _MARGIN - span_y * (y - y0) / (y1 - y0)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{span_x}" height="{span_y}" '
        'fill="none" stroke="#999999" stroke-width="1"/>',
    ]
    for pts, color in ((points_a, _COLOR_A), (points_b, _COLOR_B)):
        for x, y in pts:
            lines.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2" fill="{color}" fill-opacity="0.6"/>')
    legend_y = _MARGIN / 2
    lines.extend(
        [
            f'<circle cx="{_MARGIN}" cy="{legend_y:.2f}" r="4" fill="{_COLOR_A}"/>',
            f'<text x="{_MARGIN + 10}" y="{legend_y + 4:.2f}" font-family="sans-serif" '
            f'font-size="12">{label_a}</text>',
            f'<circle cx="{_MARGIN + 150}" cy="{legend_y:.2f}" r="4" fill="{_COLOR_B}"/>',
            f'<text x="{_MARGIN + 160}" y="{legend_y + 4:.2f}" font-family="sans-serif" '
            f'font-size="12">{label_b}</text>',
            "</svg>",
        ]
    )
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
