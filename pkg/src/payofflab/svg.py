"""Minimal self-contained SVG output: payoff-plane heatmaps with the full
payoff hull outlined, and per-component trajectory polylines."""

from __future__ import annotations

import numpy as np

from .experiments import HeatmapGrid
from .games import GameParams
from .region import full_payoff_hull

_WIDTH = 640
_HEIGHT = 640
_MARGIN = 60

_COMPONENT_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")
_COMPONENT_NAMES = ("q_cc", "q_cd", "q_dc", "q_dd")


def _color(t: float) -> str:
    """Dark blue to yellow ramp for normalized heat values in [0, 1]."""
    t = min(max(t, 0.0), 1.0)
    r = int(255 * min(1.0, 1.5 * t))
    g = int(255 * t ** 0.7)
    b = int(96 + 120 * (1.0 - t))
    return f"#{r:02x}{g:02x}{b:02x}"


def _svg_doc(body: list[str], width=_WIDTH, height=_HEIGHT) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">')
    return "\n".join([head, *body, "</svg>"]) + "\n"


def heatmap_svg(grid: HeatmapGrid, game: GameParams, path,
                highlights=None, title: str = "") -> None:
    """Render bin counts as colored rectangles over the (pi_y, pi_x) box.

    ``highlights`` is an optional list of (pi_y, pi_x) points to mark (e.g.
    endpoint clusters).  The hull of all payoffs the game can produce is
    outlined for reference.
    """
    lo = float(grid.y_edges[0])
    hi = float(grid.y_edges[-1])
    span = hi - lo if hi > lo else 1.0
    inner_w = _WIDTH - 2 * _MARGIN
    inner_h = _HEIGHT - 2 * _MARGIN

    def sx(v):
        return _MARGIN + (v - lo) / span * inner_w

    def sy(v):
        return _HEIGHT - _MARGIN - (v - lo) / span * inner_h

    body = [f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>']
    if title:
        body.append(f'<text x="{_WIDTH / 2}" y="24" text-anchor="middle" '
                    f'font-size="15">{title}</text>')
    peak = grid.counts.max()
    n = grid.counts.shape[0]
    cell_w = inner_w / n
    cell_h = inner_h / n
    for iy, ix in zip(*np.nonzero(grid.counts)):
        x = sx(grid.y_edges[iy])
        y = sy(grid.x_edges[ix + 1])
        heat = grid.counts[iy, ix] / peak if peak > 0 else 0.0
        body.append(f'<rect class="bin" x="{x:.2f}" y="{y:.2f}" width="{cell_w:.2f}" '
                    f'height="{cell_h:.2f}" fill="{_color(heat)}"/>')
    hull = full_payoff_hull(game)
    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in hull)
    body.append(f'<polygon points="{pts}" fill="none" stroke="#444" '
                'stroke-width="1.5" stroke-dasharray="6 4"/>')
    for pair in highlights or ():
        body.append(f'<circle cx="{sx(pair[0]):.2f}" cy="{sy(pair[1]):.2f}" r="5" '
                    'fill="none" stroke="red" stroke-width="2"/>')
    body.append(f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{inner_w}" '
                f'height="{inner_h}" fill="none" stroke="black"/>')
    body.append(f'<text x="{_WIDTH / 2}" y="{_HEIGHT - 18}" text-anchor="middle" '
                f'font-size="13">pi_Y ({lo:g} to {hi:g})</text>')
    body.append(f'<text x="18" y="{_HEIGHT / 2}" text-anchor="middle" font-size="13" '
                f'transform="rotate(-90 18 {_HEIGHT / 2})">pi_X ({lo:g} to {hi:g})</text>')
    with open(path, "w") as fh:
        fh.write(_svg_doc(body))


def trajectory_svg(trajectory, path, title: str = "") -> None:
    """Render the four strategy components of a recorded run as polylines."""
    iters = np.asarray(trajectory.iterations, dtype=float)
    comps = np.asarray(trajectory.strategies, dtype=float)
    inner_w = _WIDTH - 2 * _MARGIN
    inner_h = _HEIGHT - 2 * _MARGIN
    t_hi = float(iters[-1]) if len(iters) and iters[-1] > 0 else 1.0

    def sx(t):
        return _MARGIN + t / t_hi * inner_w

    def sy(v):
        return _HEIGHT - _MARGIN - v * inner_h

    body = [f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>']
    if title:
        body.append(f'<text x="{_WIDTH / 2}" y="24" text-anchor="middle" '
                    f'font-size="15">{title}</text>')
    for j in range(4):
        if len(iters):
            pts = " ".join(f"{sx(t):.2f},{sy(v):.2f}"
                           for t, v in zip(iters, comps[:, j]))
            body.append(f'<polyline class="component" points="{pts}" fill="none" '
                        f'stroke="{_COMPONENT_COLORS[j]}" stroke-width="1.5"/>')
        body.append(f'<text x="{_WIDTH - _MARGIN + 6}" y="{_MARGIN + 16 * j + 10}" '
                    f'font-size="12" fill="{_COMPONENT_COLORS[j]}">'
                    f'{_COMPONENT_NAMES[j]}</text>')
    body.append(f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{inner_w}" '
                f'height="{inner_h}" fill="none" stroke="black"/>')
    body.append(f'<text x="{_WIDTH / 2}" y="{_HEIGHT - 18}" text-anchor="middle" '
                f'font-size="13">iteration (0 to {t_hi:g})</text>')
    body.append(f'<text x="18" y="{_HEIGHT / 2}" text-anchor="middle" font-size="13" '
                f'transform="rotate(-90 18 {_HEIGHT / 2})">cooperation probability</text>')
    with open(path, "w") as fh:
        fh.write(_svg_doc(body))
