"""Planar primitives: points, translations, L_p matching cost, disks and grids.

Everything here is a pure function of its inputs.  Coordinates are plain
floats; geometric equality tests use the absolute tolerance ``TOL``.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TOL = 1e-9
INF = math.inf


class GeometryError(ValueError):
    """Raised for malformed geometric input (empty sets, bad indices, ...)."""


class Point2(NamedTuple):
    x: float
    y: float


class Translation(NamedTuple):
    dx: float
    dy: float

    def __add__(self, other):  # vector addition, not tuple concatenation
        return Translation(self.dx + other[0], self.dy + other[1])

    def __sub__(self, other):
        return Translation(self.dx - other[0], self.dy - other[1])

    def norm(self) -> float:
        return math.hypot(self.dx, self.dy)


@dataclass(frozen=True)
class Disk:
    center: Translation
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius >= 0):
            raise GeometryError(f"disk radius must be finite and >= 0, got {self.radius}")

    def contains(self, q, tol: float = TOL) -> bool:
        return math.hypot(q[0] - self.center[0], q[1] - self.center[1]) <= self.radius + tol


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned grid; vertex (i, j) sits at origin + (i*side, j*side)."""

    origin: Translation
    side: float
    level: int = 0

    def __post_init__(self):
        if not self.side > 0:
            raise GeometryError("grid side must be positive")

    def vertex(self, i: int, j: int) -> Translation:
        return Translation(self.origin[0] + i * self.side, self.origin[1] + j * self.side)

    def cell_of(self, q) -> tuple[int, int]:
        """Index of the half-open cell [x, x+side) x [y, y+side) containing q."""
        return (math.floor((q[0] - self.origin[0]) / self.side),
                math.floor((q[1] - self.origin[1]) / self.side))


def check_exponent(p) -> float:
    """Validate a cost exponent; returns it as a float (``math.inf`` allowed)."""
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise GeometryError(f"cost exponent must be a number or inf, got {p!r}") from None
    if math.isnan(p) or p < 1:
        raise GeometryError(f"cost exponent must be >= 1, got {p}")
    return p


def as_array(points, name: str = "points") -> np.ndarray:
    """Convert a sequence of (x, y) pairs into a finite (N, 2) float array."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError(f"{name} must be a sequence of (x, y) pairs")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} contains non-finite coordinates")
    return arr


def lp_mean(lengths, p: float) -> float:
    """Normalized L_p mean of nonnegative lengths (max for p = inf).

    Scales by the largest length before exponentiating so that large p
    cannot overflow.
    """
    lengths = np.asarray(lengths, dtype=float)
    if lengths.size == 0:
        raise GeometryError("empty matching")
    top = float(lengths.max())
    if top == 0.0:
        return 0.0
    if math.isinf(p):
        return top
    ratios = lengths / top
    return top * float(np.mean(ratios ** p)) ** (1.0 / p)


def edge_lengths(A, B, M, t) -> np.ndarray:
    A = as_array(A, "A")
    B = as_array(B, "B")
    if len(M) == 0:
        raise GeometryError("empty matching")
    idx = np.asarray(M, dtype=int).reshape(-1, 2)
    ai, bi = idx[:, 0], idx[:, 1]
    if ai.min() < 0 or ai.max() >= len(A) or bi.min() < 0 or bi.max() >= len(B):
        raise GeometryError("index out of range")
    diff = A[ai] + np.asarray(t, dtype=float) - B[bi]
    return np.hypot(diff[:, 0], diff[:, 1])


def cost_evaluate(A, B, M, t, p) -> float:
    """L_p cost of matching ``M`` when A is translated by ``t``.

    >>> cost_evaluate([(0, 0)], [(3, 4)], [(0, 0)], (0, 0), 1)
    5.0
    """
    return lp_mean(edge_lengths(A, B, M, t), check_exponent(p))


def nearest_site(t, sites) -> tuple[int, float]:
    """Index of the site closest to ``t`` and its distance.

    Ties go to the lexicographically smallest site, then the smallest index.
    """
    S = as_array(sites, "sites")
    if len(S) == 0:
        raise GeometryError("empty site list")
    d = np.hypot(S[:, 0] - t[0], S[:, 1] - t[1])
    best = float(d.min())
    tied = np.flatnonzero(d == best)
    if len(tied) > 1:
        idx = min(tied, key=lambda i: (S[i, 0], S[i, 1], i))
    else:
        idx = int(tied[0])
    return int(idx), best


# -- enclosing disks ---------------------------------------------------------

def _disk_two(a, b) -> tuple[float, float, float]:
    cx, cy = (a[0] + b[0]) / 2, (a[1] + b[1]) / 2
    return cx, cy, max(math.hypot(a[0] - cx, a[1] - cy), math.hypot(b[0] - cx, b[1] - cy))


def _disk_three(a, b, c):
    """Circumscribed circle of a, b, c, or None if collinear."""
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2.0
    if d == 0.0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
              + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
              + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(math.hypot(x - q[0], y - q[1]) for q in (a, b, c))
    return x, y, r


def _inside(q, circ, tol=1e-12) -> bool:
    return circ is not None and math.hypot(q[0] - circ[0], q[1] - circ[1]) <= circ[2] * (1 + tol) + tol


def min_enclosing_disk(P) -> Disk:
    """Smallest disk containing every point of ``P`` (Welzl, iterative).

    The input order is shuffled with a fixed seed, so the expected running
    time is linear and the result is reproducible.
    """
    pts = [(float(q[0]), float(q[1])) for q in P]
    if not pts:
        raise GeometryError("min_enclosing_disk of an empty set")
    random.Random(0x5EED).shuffle(pts)
    circ = None
    for i, p in enumerate(pts):
        if _inside(p, circ):
            continue
        circ = (p[0], p[1], 0.0)
        for j in range(i):
            q = pts[j]
            if _inside(q, circ):
                continue
            circ = _disk_two(p, q)
            for l in range(j):
                r = pts[l]
                if _inside(r, circ):
                    continue
                c3 = _disk_three(p, q, r)
                # collinear triple: the two farthest points span the disk
                circ = c3 if c3 is not None else max(
                    (_disk_two(p, q), _disk_two(p, r), _disk_two(q, r)), key=lambda c: c[2])
    return Disk(Translation(circ[0], circ[1]), circ[2])


def approx_smallest_hdisk(P, h: int) -> Disk:
    """Point-centered disk containing at least ``h`` points of ``P``.

    Among all disks centered at a point q of P whose radius is the distance
    from q to its h-th nearest point (q itself counts), returns the smallest.
    Its radius is at most twice that of the smallest disk with an arbitrary
    center holding h points.  Ties: smaller radius, then lexicographic center,
    then index.
    """
    pts = as_array(P, "P")
    if not 1 <= h <= len(pts):
        raise GeometryError(f"h={h} out of range for {len(pts)} points")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    kth = np.partition(dist, h - 1, axis=1)[:, h - 1]
    best = kth.min()
    tied = np.flatnonzero(kth == best)
    idx = min(tied, key=lambda i: (pts[i, 0], pts[i, 1], i))
    return Disk(Translation(float(pts[idx, 0]), float(pts[idx, 1])), float(best))


# -- grids ---------------------------------------------------------------------

def _cell_hits_disk(cx, cy, r, x0, y0, side):
    """Does the half-open cell [x0, x0+side) x [y0, y0+side) meet the closed disk?

    Vectorized over x0 / y0.
    """
    px = np.clip(cx, x0, x0 + side)
    py = np.clip(cy, y0, y0 + side)
    d = np.hypot(px - cx, py - cy)
    # the nearest point of the closed cell is only usable if it is inside the
    # half-open cell, i.e. not on its right or top edge
    on_open_edge = (px == x0 + side) | (py == y0 + side)
    return (d < r) | ((d == r) & ~on_open_edge)


def covering_vertex_rows(center, radius: float, side: float):
    """Row-wise description of the grid vertices covering a disk.

    The grid is anchored at ``center``.  Returns ``(j_lo, lo, hi)`` where
    vertex row ``j_lo + r`` contains the vertex indices ``lo[r]..hi[r]``
    (inclusive).  Vertices belong to half-open cells meeting the closed disk.
    """
    if not side > 0:
        raise GeometryError("grid side must be positive")
    if not (math.isfinite(radius) and radius >= 0):
        raise GeometryError("disk radius must be finite and >= 0")
    del center  # the vertex pattern is translation invariant
    n = int(math.ceil(radius / side)) + 1
    rows = np.arange(-n, n + 1)
    y0 = rows * side
    dy = np.abs(np.clip(0.0, y0, y0 + side))
    half_width = np.sqrt(np.maximum(radius * radius - dy * dy, 0.0))
    c = np.floor(half_width / side).astype(int)
    # the extreme intersecting cells sit within two cells of the estimate;
    # settle them with the exact test
    offs = np.arange(-2, 3)
    right = c[:, None] + offs[None, :]
    left = -c[:, None] - 1 + offs[None, :]
    hit_r = _cell_hits_disk(0.0, 0.0, radius, right * side, y0[:, None], side)
    hit_l = _cell_hits_disk(0.0, 0.0, radius, left * side, y0[:, None], side)
    any_row = hit_r.any(axis=1) | hit_l.any(axis=1)
    hi_cell = np.where(hit_r, right, np.iinfo(int).min).max(axis=1)
    lo_cell = np.where(hit_l, left, np.iinfo(int).max).min(axis=1)
    hi_cell = np.maximum(hi_cell, lo_cell)
    lo_cell = np.minimum(lo_cell, hi_cell)
    rows_lo, rows_hi = {}, {}
    for r in np.flatnonzero(any_row):
        lo, hi = int(lo_cell[r]), int(hi_cell[r]) + 1
        for jv in (int(rows[r]), int(rows[r]) + 1):
            rows_lo[jv] = min(rows_lo.get(jv, lo), lo)
            rows_hi[jv] = max(rows_hi.get(jv, hi), hi)
    js = sorted(rows_lo)
    lo = np.array([rows_lo[j] for j in js])
    hi = np.array([rows_hi[j] for j in js])
    return js[0], lo, hi


def grid_vertices_covering_disk(D: Disk, side: float) -> list[Translation]:
    """All vertices of grid cells (side ``side``, anchored at the disk center)
    that meet ``D``.  Every point of D lies within side/sqrt(2) of one of them.
    """
    j_lo, lo, hi = covering_vertex_rows(D.center, D.radius, side)
    cx, cy = float(D.center[0]), float(D.center[1])
    out = []
    for r in range(len(lo)):
        y = cy + (j_lo + r) * side
        for i in range(int(lo[r]), int(hi[r]) + 1):
            out.append(Translation(cx + i * side, y))
    return out


def covering_vertex_count(radius: float, side: float) -> int:
    _, lo, hi = covering_vertex_rows((0.0, 0.0), radius, side)
    return int(np.sum(hi - lo + 1))
