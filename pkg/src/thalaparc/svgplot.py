"""Dependency-free SVG scatter of a 2-D latent embedding colored by label."""

from __future__ import annotations

import numpy as np

from .labels import NUCLEI

CANVAS = 1000
_MARGIN = 70
_POINT_RADIUS = 2.0
_UNLABELED_COLOR = "#bbbbbb"

# One fixed color per nucleus code, in schema order.
PALETTE = (
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4",
    "#46f0f0", "#f032e6", "#bcf60c", "#fabebe", "#008080",
    "#9a6324", "#800000", "#000075",
)

LABEL_COLORS = dict(zip(NUCLEI, PALETTE))


def scatter_svg(points: np.ndarray, labels) -> str:
    """Render an SVG document; ``labels`` entries outside the schema plot gray."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] < 2 or points.shape[0] == 0:
        raise ValueError("need a non-empty (n, >=2) coordinate array")
    xy = points[:, :2]
    lo = xy.min(axis=0)
    hi = xy.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    extent = CANVAS - 2 * _MARGIN
    scaled = (xy - lo) / span * extent
    xs = _MARGIN + scaled[:, 0]
    ys = CANVAS - _MARGIN - scaled[:, 1]

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" '
        f'viewBox="0 0 {CANVAS} {CANVAS}">',
        f'<rect width="{CANVAS}" height="{CANVAS}" fill="white"/>',
    ]
    for x, y, label in zip(xs, ys, labels):
        color = LABEL_COLORS.get(label, _UNLABELED_COLOR)
        parts.append(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{_POINT_RADIUS}" fill="{color}" fill-opacity="0.8"/>'
        )
    legend_x = CANVAS - _MARGIN - 90
    legend_y = _MARGIN
    parts.append(
        f'<rect x="{legend_x - 10}" y="{legend_y - 20}" width="100" '
        f'height="{len(NUCLEI) * 20 + 30}" fill="white" stroke="#444444"/>'
    )
    for row, code in enumerate(NUCLEI):
        y = legend_y + row * 20
        parts.append(
            f'<rect x="{legend_x}" y="{y - 9}" width="12" height="12" fill="{LABEL_COLORS[code]}"/>'
        )
        parts.append(
            f'<text x="{legend_x + 18}" y="{y + 2}" font-family="sans-serif" font-size="13">{code}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
