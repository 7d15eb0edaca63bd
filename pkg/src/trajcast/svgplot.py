"""Deterministic SVG overlays of one window's trajectories.

Each pedestrian gets four polylines: observed past, ground-truth future,
raw prediction, refined prediction (all in absolute scene coordinates).
The affine world-to-viewport transform is embedded as JSON inside the
<desc> element so consumers can invert it exactly:

    svg_x = (x - min_x) * scale + margin
    svg_y = (max_y - y) * scale + margin
"""

from __future__ import annotations

import json

import numpy as np

from .datasets import SceneWindow
from .model import WindowPrediction

_STYLES = {
    "past": 'stroke="#607080" stroke-width="2"',
    "gt": 'stroke="#2c8a2c" stroke-width="2"',
    "raw": 'stroke="#e0a030" stroke-width="1.5" stroke-dasharray="6 3"',
    "refined": 'stroke="#c03030" stroke-width="1.5"',
}


def _polyline(points: np.ndarray, role: str, transform) -> str:
    coords = " ".join(f"{transform(p)[0]!r},{transform(p)[1]!r}" for p in points)
    return f'  <polyline class="{role}" fill="none" {_STYLES[role]} points="{coords}" />'


def render_window_svg(
    window: SceneWindow,
    prediction: WindowPrediction | None = None,
    size: int = 480,
    margin: float = 20.0,
) -> str:
    """Render one window (and optionally its predictions) to an SVG string."""
    anchor = window.anchor[:, None, :]
    tracks: list[tuple[str, np.ndarray]] = []
    for i in range(window.n_peds):
        tracks.append(("past", window.absolute_past[i]))
        tracks.append(("gt", window.future[i] + anchor[i]))
        if prediction is not None:
            tracks.append(("raw", prediction.raw[i] + anchor[i]))
            tracks.append(("refined", prediction.refined[i] + anchor[i]))
    allpts = np.concatenate([t for _, t in tracks], axis=0)
    min_x, min_y = allpts.min(axis=0)
    max_x, max_y = allpts.max(axis=0)
    extent = max(max_x - min_x, max_y - min_y)
    scale = (size - 2.0 * margin) / extent if extent > 0 else 1.0

    def transform(p):
        return (float((p[0] - min_x) * scale + margin), float((max_y - p[1]) * scale + margin))

    desc = json.dumps(
        {"scale": float(scale), "min_x": float(min_x), "max_y": float(max_y), "margin": margin}
    )
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}"'
        f' viewBox="0 0 {size} {size}">',
        f"  <desc>{desc}</desc>",
    ]
    for role, pts in tracks:
        lines.append(_polyline(pts, role, transform))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def invert_transform(svg_text: str, svg_xy: tuple[float, float]) -> tuple[float, float]:
    """Map a viewport coordinate back to world coordinates via the <desc> JSON."""
    start = svg_text.index("<desc>") + len("<desc>")
    stop = svg_text.index("</desc>")
    meta = json.loads(svg_text[start:stop])
    x = (svg_xy[0] - meta["margin"]) / meta["scale"] + meta["min_x"]
    y = meta["max_y"] - (svg_xy[1] - meta["margin"]) / meta["scale"]
    return (x, y)
