"""SVG rendering of a matching diagram (sites, Voronoi cells, nested squares, grids)."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .diagram import VORONOI3, VORONOI_CLUSTER, MatchingDiagram, voronoi_cell_polygon

VIEW = 1000.0


def _frame(diagram: MatchingDiagram):
    S = diagram.site_array
    lo, hi = S.min(axis=0), S.max(axis=0)
    span = float(np.max(hi - lo))
    if span == 0.0:
        # a lone site: frame its outermost square instead
        reach = max([2.0 ** (u - 1) * v for u, v in zip(diagram.site_levels, diagram.site_scales)]
                    + [0.5])
        lo, hi, span = lo - reach, hi + reach, 2 * reach
    mid = (lo + hi) / 2
    half = 0.5 * span * 1.1
    return mid[0] - half, mid[1] - half, mid[0] + half, mid[1] + half


def export_svg(diagram: MatchingDiagram, show_grids: bool = True, title: str | None = None) -> str:
    x0, y0, x1, y1 = _frame(diagram)
    scale = VIEW / (x1 - x0)

    def X(x):
        return f"{(x - x0) * scale:.3f}"

    def Y(y):
        return f"{(y1 - y) * scale:.3f}"

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="0 0 {VIEW:g} {VIEW:g}" '
           f'width="{VIEW:g}" height="{VIEW:g}">']
    out.append(f"<title>{escape(title or diagram.kind + ' matching diagram')}</title>")
    out.append('<rect x="0" y="0" width="1000" height="1000" fill="white"/>')
    S = diagram.site_array
    box = (x0, y0, x1, y1)
    out.append("<defs>")
    for s in range(len(S)):
        poly = voronoi_cell_polygon(S, s, box)
        pts = " ".join(f"{X(a)},{Y(b)}" for a, b in poly)
        out.append(f'<clipPath id="vc{s}"><polygon points="{pts}"/></clipPath>')
    out.append("</defs>")
    for s in range(len(S)):
        poly = voronoi_cell_polygon(S, s, box)
        pts = " ".join(f"{X(a)},{Y(b)}" for a, b in poly)
        out.append(f'<polygon class="voronoi-cell" points="{pts}" fill="none" stroke="#555" stroke-width="1"/>')
    if diagram.kind not in (VORONOI3, VORONOI_CLUSTER):
        N = diagram.grid_cells_per_half_side
        for s, (cx, cy) in enumerate(S):
            v = diagram.site_scales[s]
            if not v:
                continue
            out.append(f'<g clip-path="url(#vc{s})">')
            for level in range(diagram.site_levels[s] + 1):
                half = 2.0 ** (level - 1) * v
                w = 2 * half * scale
                out.append(f'<rect class="level-square" data-level="{level}" x="{X(cx - half)}" '
                           f'y="{Y(cy + half)}" width="{w:.3f}" height="{w:.3f}" '
                           f'fill="none" stroke="#c33" stroke-width="1"/>')
                if show_grids:
                    side = diagram.eps * 2.0 ** (level - 3) * v
                    inner = 0 if level == 0 else N // 2
                    out.append(_grid_path(cx, cy, side, N, inner, X, Y))
            out.append("</g>")
    for s, (cx, cy) in enumerate(S):
        out.append(f'<circle class="site" data-site="{s}" cx="{X(cx)}" cy="{Y(cy)}" r="3" fill="#136"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _grid_path(cx, cy, side, N, inner, X, Y) -> str:
    """Grid lines of one level: index range -N..N, skipping the inner square."""
    seg = []
    for q in range(-N, N + 1):
        c = q * side
        if inner and -inner < q < inner:
            # line crosses the hole: draw the two outer pieces
            for a, b in ((-N, -inner), (inner, N)):
                seg.append(f"M{X(cx + c)} {Y(cy + a * side)}V{Y(cy + b * side)}")
                seg.append(f"M{X(cx + a * side)} {Y(cy + c)}H{X(cx + b * side)}")
        else:
            seg.append(f"M{X(cx + c)} {Y(cy - N * side)}V{Y(cy + N * side)}")
            seg.append(f"M{X(cx - N * side)} {Y(cy + c)}H{X(cx + N * side)}")
    return f'<path class="grid" d="{"".join(seg)}" fill="none" stroke="#aaa" stroke-width="0.5"/>'
