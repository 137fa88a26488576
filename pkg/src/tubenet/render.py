"""Top-view SVG of a planned network.

Hand-written markup, so output is byte-stable for a given input. Buffer cells
are drawn per z-layer inside ``<g class="layer" data-z="k">`` groups; pass
``layers`` to hide some of them.
"""

from __future__ import annotations

from typing import Iterable, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .grid import GridGraph, Route

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
)


def _f(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _points(pts: Iterable[Sequence[float]]) -> str:
    return " ".join(f"{_f(x)},{_f(y)}" for x, y, *_ in pts)


def _risk_fill(theta: float) -> str:
    # low-risk zones green, high-risk zones red
    return "#4daf4a" if theta < 1 else "#e41a1c"


def render_svg(grid: GridGraph, routes: Sequence[Route], *, width_px: int = 900,
               layers: Iterable[int] | None = None, title: str | None = None) -> str:
    """SVG text showing obstacles, risk zones, per-layer buffers and route polylines."""
    sc = grid.scenario
    ox, oy, _ = grid.origin
    nx, ny, nz = grid.dims
    cx, cy, _ = grid.cell_size
    W, H = nx * cx, ny * cy
    scale = width_px / W
    shown = set(range(nz)) if layers is None else set(layers)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{_f(H * scale)}" '
        f'viewBox="{_f(ox)} {_f(-oy - H)} {_f(W)} {_f(H)}">',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append(f'<rect x="{_f(ox)}" y="{_f(-oy - H)}" width="{_f(W)}" height="{_f(H)}" fill="#ffffff"/>')
    # flip y so north is up
    out.append('<g transform="scale(1,-1)">')
    if sc is not None:
        out.append('<g id="risk">')
        for z in sc.risk_zones:
            out.append(f'<polygon points="{_points(z.footprint)}" fill="{_risk_fill(z.theta_risk)}" '
                       f'fill-opacity="0.15" stroke="none" data-theta="{_f(z.theta_risk)}"/>')
        out.append("</g>")
        out.append('<g id="obstacles">')
        zlo = sc.flyable_band[0]
        for ob in sc.obstacles:
            shade = "#555555" if ob.highest_alt > zlo else "#bbbbbb"
            out.append(f'<polygon points="{_points(ob.footprint)}" fill="{shade}" stroke="none"/>')
        out.append("</g>")

    bufs: set[int] = set()
    paths: set[int] = set()
    for r in routes:
        bufs |= r.buffer_cells
        paths |= r.path_cells
    bufs -= paths
    out.append('<g id="buffers" fill="#888888" stroke="none">')
    by_layer: dict[int, list[int]] = {}
    for c in sorted(bufs):
        by_layer.setdefault(c % nz, []).append(c)
    for z in range(nz):
        cells = by_layer.get(z, [])
        vis = "visible" if z in shown else "hidden"
        out.append(f'<g class="layer" data-z="{z}" visibility="{vis}" fill-opacity="{_f(0.35 / nz)}">')
        if cells:
            xyz = grid.cells_to_xyz(np.asarray(cells, dtype=np.int64))
            for x, y, _ in xyz:
                out.append(f'<rect x="{_f(ox + x * cx)}" y="{_f(oy + y * cy)}" width="{_f(cx)}" height="{_f(cy)}"/>')
        out.append("</g>")
    out.append("</g>")

    stroke = _f(max(cx, cy) * 0.6)
    out.append('<g id="routes" fill="none" stroke-linecap="round" stroke-linejoin="round">')
    for k, r in enumerate(routes):
        colour = PALETTE[k % len(PALETTE)]
        out.append(f'<polyline points="{_points(r.waypoints)}" stroke="{colour}" stroke-width="{stroke}" '
                   f'data-od="{escape(r.od_id)}"/>')
    out.append("</g>")
    if sc is not None:
        out.append('<g id="vertiports" fill="#000000">')
        rad = _f(max(cx, cy) * 0.8)
        for v in sc.vertiports:
            out.append(f'<circle cx="{_f(v.position[0])}" cy="{_f(v.position[1])}" r="{rad}"/>')
        out.append("</g>")
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
