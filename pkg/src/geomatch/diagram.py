"""Approximate matching diagrams over the translation plane.

A diagram is a set of sites (point-to-point translations or cluster
centers) plus an implicit subdivision of every site's Voronoi cell.  Faces
are never stored as polygons: a query finds the nearest site and then the
face by integer grid arithmetic relative to that site.  Face matchings are
solved on first use and memoized.

Kinds
-----
VORONOI3         Voronoi diagram of T, one matching per cell (factor 3(1+delta)).
VORONOI_CLUSTER  Voronoi diagram of the cluster centers (factor (1+6*2^(1/p))(1+delta)).
EPS_T            nested grids around every site of T (factor 1+eps).
EPS_CLUSTER      nested grids around every cluster center (factor 1+eps); cells
                 whose guarantee cannot be certified are split lazily.
"""
from __future__ import annotations

import hashlib
import math
import threading
from concurrent.futures import Future
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .geometry import GeometryError, Translation, as_array, check_exponent
from .matching import MatchingError, canonical, solve_exact, solve_within
from .parallel import map_ordered
from .search import (CandidateSet, build_cluster_centers, build_point_to_point_set,
                     cluster_constant, optcost_lower_bounds)

VORONOI3 = "VORONOI3"
VORONOI_CLUSTER = "VORONOI_CLUSTER"
EPS_T = "EPS_T"
EPS_CLUSTER = "EPS_CLUSTER"
KINDS = (VORONOI3, VORONOI_CLUSTER, EPS_T, EPS_CLUSTER)

CELL = "CELL"                    # a whole Voronoi cell
CENTRAL_CELL = "CENTRAL_CELL"    # grid cell inside B_0
ANNULUS_CELL = "ANNULUS_CELL"    # grid cell inside B_i minus B_(i-1)
OUTER = "OUTER"                  # the part of the Voronoi cell outside B_u


class DiagramError(GeometryError):
    pass


@dataclass
class DiagramFace:
    site: int
    region: str
    level: int
    i: int
    j: int
    depth: int
    center: Translation
    matching: tuple | None = None
    center_cost: float | None = None
    refined: bool = False

    @property
    def key(self):
        return face_key(self.site, self.region, self.level, self.depth, self.i, self.j)


def face_key(site, region, level=0, depth=0, i=0, j=0):
    return (site, region, level, depth, i, j)


class _FaceTable:
    """Memo table where every key is computed exactly once, even under threads."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict = {}

    def get(self, key, compute):
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                entry = Future()
                self._entries[key] = entry
                owner = True
            else:
                owner = False
        if owner:
            try:
                entry.set_result(compute())
            except BaseException as exc:
                with self._lock:
                    del self._entries[key]
                entry.set_exception(exc)
                raise
        return entry.result()

    def put(self, key, value):
        with self._lock:
            f = Future()
            f.set_result(value)
            self._entries[key] = f

    def items(self):
        with self._lock:
            snap = list(self._entries.items())
        return [(k, f.result()) for k, f in snap if f.done() and f.exception() is None]

    def __len__(self):
        return len(self._entries)


@dataclass
class MatchingDiagram:
    instance_hash: str
    kind: str
    p: float
    k: int
    sites: CandidateSet
    eps: float = 0.0
    delta: float = 0.0
    level_count: int = 0
    base_values: list = field(default_factory=list)
    site_levels: list = field(default_factory=list)
    site_scales: list = field(default_factory=list)
    guarantee_factor: float = 3.0
    faces: _FaceTable = field(default_factory=_FaceTable, repr=False)

    @property
    def site_array(self) -> np.ndarray:
        return self.sites.array()

    @property
    def grid_cells_per_half_side(self) -> int:
        """N: each B_i spans indices -N..N-1 of its own level grid."""
        return int(round(4 / self.eps))


def instance_hash(A, B, k, p) -> str:
    A = as_array(A, "A")
    B = as_array(B, "B")
    p = check_exponent(p)
    h = hashlib.sha256()
    h.update(f"{len(A)} {len(B)} {int(k)} {'inf' if math.isinf(p) else repr(p)}\n".encode())
    for x, y in np.concatenate([A, B]):
        h.update(f"{float(x)!r} {float(y)!r}\n".encode())
    return h.hexdigest()


def normalize_eps(eps: float) -> tuple[float, int]:
    """Largest power of two 2^-alpha <= eps, and alpha."""
    if not 0 < eps <= 1:
        raise DiagramError("eps must lie in (0, 1]")
    alpha = max(0, math.ceil(-math.log2(eps) - 1e-12))
    while 2.0 ** -alpha > eps:
        alpha += 1
    return 2.0 ** -alpha, alpha


def _check_instance(A, B, k, p):
    A = as_array(A, "A")
    B = as_array(B, "B")
    if len(A) == 0 or len(B) == 0:
        raise GeometryError("empty point set")
    p = check_exponent(p)
    if not 1 <= k <= min(len(A), len(B)):
        raise MatchingError(f"infeasible size k={k} for m={len(A)}, n={len(B)}")
    return A, B, int(k), p


# -- builders -------------------------------------------------------------------

def build_voronoi3_diagram(A, B, k, p, delta: float = 0.0) -> MatchingDiagram:
    """Voronoi diagram of T; each cell carries its site's matching."""
    A, B, k, p = _check_instance(A, B, k, p)
    T = build_point_to_point_set(A, B)
    return MatchingDiagram(instance_hash(A, B, k, p), VORONOI3, p, k, T, delta=delta,
                           base_values=[None] * len(T), guarantee_factor=3 * (1 + delta))


def build_cluster_voronoi_diagram(A, B, k, p, delta: float = 0.0) -> MatchingDiagram:
    """Voronoi diagram of the cluster centers without refinement."""
    A, B, k, p = _check_instance(A, B, k, p)
    X = build_cluster_centers(build_point_to_point_set(A, B), k)
    factor = (1 + 2 * cluster_constant(p)) * (1 + delta)
    return MatchingDiagram(instance_hash(A, B, k, p), VORONOI_CLUSTER, p, k, X, delta=delta,
                           base_values=[None] * len(X), guarantee_factor=factor)


def build_eps_diagram(A, B, k, p, eps: float, site_kind: str = EPS_T) -> MatchingDiagram:
    """(1 + eps)-approximate diagram from nested grids around every site.

    ``eps`` is first rounded down to a power of two.  Around site t0 with
    base value v0, B_i is the square of side 2^i * v0 (i = 0..u) and the
    grid inside B_i minus B_(i-1) has side eps * 2^(i-3) * v0.
    """
    if site_kind not in (EPS_T, EPS_CLUSTER):
        raise DiagramError(f"unknown site kind {site_kind!r}")
    A, B, k, p = _check_instance(A, B, k, p)
    eps_r, alpha = normalize_eps(eps)
    u = alpha + 2
    T = build_point_to_point_set(A, B)
    sites = T if site_kind == EPS_T else build_cluster_centers(T, k)
    S = sites.array()
    base = [r.cost for r in map_ordered(lambda t: solve_within(A, B, k, p, t, eps_r / 2),
                                        sites.translations)]
    scales, levels = list(base), [u] * len(sites)
    if site_kind == EPS_CLUSTER:
        Tarr = T.array()
        for s, (xi, v0) in enumerate(zip(S, base)):
            dT = np.hypot(Tarr[:, 0] - xi[0], Tarr[:, 1] - xi[1])
            far = float(dT.max())
            if v0 == 0.0:
                others = dT[dT > 1e-12]
                if len(others) == 0:
                    scales[s] = 0.0      # T is a single point: one face suffices
                    continue
                # inside B_0 the site stays the nearest point of T
                scales[s] = float(others.min()) / 2
            # beyond B_u the site's own matching is (1+eps)-good because
            # optcost(t) >= |t - xi| - far
            need = (v0 + (1 + eps_r) * far) / (eps_r * scales[s])
            levels[s] = max(u, 1 + math.ceil(math.log2(max(need, 1.0))))
    return MatchingDiagram(instance_hash(A, B, k, p), site_kind, p, k, sites, eps=eps_r,
                           level_count=u, base_values=base, site_levels=levels,
                           site_scales=scales, guarantee_factor=1 + eps_r)


# -- point location -----------------------------------------------------------------

def _site_face(diagram, s, A, B):
    t0 = diagram.sites.translations[s]

    def compute():
        res = solve_within(A, B, diagram.k, diagram.p, t0, diagram.delta or diagram.eps / 2)
        return DiagramFace(s, CELL, 0, 0, 0, 0, Translation(*t0), res.matching, res.cost)

    return diagram.faces.get(face_key(s, CELL), compute)


def _grid_side(diagram, s, level):
    return diagram.eps * 2.0 ** (level - 3) * diagram.site_scales[s]


def locate(diagram: MatchingDiagram, t) -> tuple:
    """Pure point location: (site, region, level, depth=0, i, j) without solving."""
    s, _ = geo.nearest_site(t, diagram.site_array)
    if diagram.kind in (VORONOI3, VORONOI_CLUSTER):
        return face_key(s, CELL)
    scale = diagram.site_scales[s]
    if scale == 0.0:
        return face_key(s, CELL)
    t0 = diagram.sites.translations[s]
    rx, ry = t[0] - t0[0], t[1] - t0[1]
    N = diagram.grid_cells_per_half_side
    for level in range(diagram.site_levels[s] + 1):
        side = _grid_side(diagram, s, level)
        i, j = math.floor(rx / side), math.floor(ry / side)
        if -N <= i < N and -N <= j < N:
            return face_key(s, CENTRAL_CELL if level == 0 else ANNULUS_CELL, level, 0, i, j)
    return face_key(s, OUTER, -1)


def _cell_face(diagram, A, B, s, region, level, depth, i, j):
    side = _grid_side(diagram, s, level) / 2 ** depth
    t0 = diagram.sites.translations[s]
    if diagram.kind == EPS_CLUSTER and level == 0 and diagram.base_values[s] == 0.0:
        # zero-cost center: B_0 lies inside the center's own T-Voronoi cell
        center = Translation(*t0)
    else:
        center = Translation(t0[0] + (i + 0.5) * side, t0[1] + (j + 0.5) * side)

    def compute():
        res = solve_within(A, B, diagram.k, diagram.p, center, diagram.eps / 2)
        face = DiagramFace(s, region, level, i, j, depth, center, res.matching, res.cost)
        if diagram.kind == EPS_CLUSTER:
            face.refined = not _certified(diagram, A, B, s, level, depth, side, face)
        return face

    return diagram.faces.get(face_key(s, region, level, depth, i, j), compute)


def max_refine_depth(diagram) -> int:
    if diagram.kind != EPS_CLUSTER:
        return 0
    return max(0, math.ceil(math.log2(cluster_constant(diagram.p) / math.sqrt(2))))


def _certified(diagram, A, B, s, level, depth, side, face) -> bool:
    """Can the face's matching be proven (1+eps)-good on the whole cell?

    cost(M, t) <= optcost(t) + 2h for every t in the cell (h = half
    diagonal), so it suffices that 2h <= eps * (a lower bound on optcost
    over the cell).
    """
    if depth >= max_refine_depth(diagram):
        return True
    if level == 0 and diagram.base_values[s] == 0.0:
        return True
    h = side / math.sqrt(2)
    t0 = diagram.sites.translations[s]
    c = face.center
    # distance range from the site to the closed cell
    x0, y0 = c[0] - side / 2 - t0[0], c[1] - side / 2 - t0[1]
    nx = min(max(0.0, x0), x0 + side) if not (x0 <= 0 <= x0 + side) else 0.0
    ny = min(max(0.0, y0), y0 + side) if not (y0 <= 0 <= y0 + side) else 0.0
    d_min = math.hypot(nx, ny)
    d_max = math.hypot(max(abs(x0), abs(x0 + side)), max(abs(y0), abs(y0 + side)))
    lb_c = float(optcost_lower_bounds(A, B, diagram.k, diagram.p, [c])[0])
    lower = max(face.center_cost - h, lb_c - h,
                diagram.base_values[s] - d_max, d_min / cluster_constant(diagram.p))
    return 2 * h <= diagram.eps * lower


def query_face(diagram: MatchingDiagram, t, A, B) -> DiagramFace:
    key = locate(diagram, t)
    s, region, level = key[0], key[1], key[2]
    if region in (CELL, OUTER):
        face = _site_face(diagram, s, A, B)
        if region == OUTER:
            face = diagram.faces.get(key, lambda: DiagramFace(
                s, OUTER, -1, 0, 0, 0, face.center, face.matching, face.center_cost))
        return face
    _, _, _, _, i, j = key
    if diagram.kind == EPS_CLUSTER and level == 0 and diagram.base_values[s] == 0.0:
        i = j = 0
        return _cell_face(diagram, A, B, s, region, 0, 0, 0, 0)
    t0 = diagram.sites.translations[s]
    depth = 0
    while True:
        face = _cell_face(diagram, A, B, s, region, level, depth, i, j)
        if not face.refined:
            return face
        depth += 1
        side = _grid_side(diagram, s, level) / 2 ** depth
        i, j = math.floor((t[0] - t0[0]) / side), math.floor((t[1] - t0[1]) / side)


def query_diagram(diagram: MatchingDiagram, t, A, B, k, p):
    """Face containing ``t``, its matching, and that matching's cost at ``t``."""
    if instance_hash(A, B, k, p) != diagram.instance_hash:
        raise DiagramError("diagram was built for a different instance")
    face = query_face(diagram, t, A, B)
    return face, face.matching, geo.cost_evaluate(A, B, face.matching, t, p)


# -- counting --------------------------------------------------------------------

def site_face_count(diagram, s) -> int:
    """Grid cells of B_0 and every annulus, plus up to four outer faces."""
    if diagram.kind in (VORONOI3, VORONOI_CLUSTER) or diagram.site_scales[s] == 0.0:
        return 1
    N = diagram.grid_cells_per_half_side
    u = diagram.site_levels[s]
    central = 1 if (diagram.kind == EPS_CLUSTER and diagram.base_values[s] == 0.0) else (2 * N) ** 2
    return central + u * 3 * N * N + 4


def diagram_face_count(diagram: MatchingDiagram) -> int:
    """Upper bound on the number of faces; refinements materialized so far in
    an EPS_CLUSTER diagram add three faces each."""
    total = sum(site_face_count(diagram, s) for s in range(len(diagram.sites)))
    if diagram.kind == EPS_CLUSTER:
        total += 3 * sum(1 for _, f in diagram.faces.items() if f.refined)
    return total


def materialize(diagram: MatchingDiagram, A, B) -> int:
    """Solve every face eagerly (including all refinements); returns the
    resulting face count.  Expensive: one solve per face."""
    if diagram.kind in (VORONOI3, VORONOI_CLUSTER):
        for s in range(len(diagram.sites)):
            _site_face(diagram, s, A, B)
        return diagram_face_count(diagram)
    N = diagram.grid_cells_per_half_side
    for s in range(len(diagram.sites)):
        _site_face(diagram, s, A, B)
        if diagram.site_scales[s] == 0.0:
            continue
        for level in range(diagram.site_levels[s] + 1):
            region = CENTRAL_CELL if level == 0 else ANNULUS_CELL
            if level == 0 and diagram.kind == EPS_CLUSTER and diagram.base_values[s] == 0.0:
                _cell_face(diagram, A, B, s, region, 0, 0, 0, 0)
                continue
            for i in range(-N, N):
                for j in range(-N, N):
                    if level > 0 and -N // 2 <= i < N // 2 and -N // 2 <= j < N // 2:
                        continue
                    stack = [(0, i, j)]
                    while stack:
                        d, a, b = stack.pop()
                        face = _cell_face(diagram, A, B, s, region, level, d, a, b)
                        if face.refined:
                            stack.extend((d + 1, 2 * a + x, 2 * b + y)
                                         for x in (0, 1) for y in (0, 1))
    return diagram_face_count(diagram)


# -- RMS linear envelope ---------------------------------------------------------------

def l2_envelope_query(T, site_matchings, s, A, B, k, p=2):
    """Site whose matching minimizes the RMS cost at translation ``s``.

    Uses the linear functions f_t(s) = 2 sum <a - b, s> + sum |a - b|^2;
    k * cost_2(M_t, s)^2 = f_t(s) + k |s|^2, so the argmin is the same.
    """
    if check_exponent(p) != 2:
        raise DiagramError("the linear envelope only exists for p = 2")
    A = as_array(A, "A")
    B = as_array(B, "B")
    sites = as_array(T, "T")
    if len(sites) == 0 or len(site_matchings) != len(sites):
        raise DiagramError("need one matching per site")
    vals = []
    for M in site_matchings:
        idx = np.asarray(M, dtype=int).reshape(-1, 2)
        d = A[idx[:, 0]] - B[idx[:, 1]]
        vals.append(2 * float(d.sum(axis=0) @ np.asarray(s, dtype=float))
                    + float((d * d).sum()))
    best = _argmin_with_ties(vals, sites)
    return best, site_matchings[best]


def _argmin_with_ties(vals, sites, rel=1e-9) -> int:
    vals = np.asarray(vals, dtype=float)
    low = vals.min()
    tied = np.flatnonzero(vals <= low + rel * max(1.0, abs(low)))
    return int(min(tied, key=lambda i: (sites[i, 0], sites[i, 1], i)))


# -- verification -------------------------------------------------------------------------

def verify_diagram(diagram: MatchingDiagram, A, B, k, p, sample_count: int, seed: int = 0):
    """Empirical worst ratio cost(M_face, t) / optcost(t) over random queries.

    Samples mix uniform points of an inflated box around the sites, points
    near sites, and points just inside/outside the nested squares.
    """
    if sample_count < 1:
        raise DiagramError("sample_count must be >= 1")
    if instance_hash(A, B, k, p) != diagram.instance_hash:
        raise DiagramError("diagram was built for a different instance")
    A, B, k, p = _check_instance(A, B, k, p)
    queries = sample_translations(diagram, A, B, sample_count, seed)
    located = [query_diagram(diagram, t, A, B, k, p) for t in queries]
    opts = map_ordered(lambda t: solve_exact(A, B, k, p, t).cost, queries)
    worst, worst_t, min_ratio = 0.0, None, math.inf
    zero_ok = True
    for t, (_, _, c), o in zip(queries, located, opts):
        if o < 1e-12:
            if c >= 1e-9:
                zero_ok = False
                ratio = math.inf
            else:
                continue
        else:
            ratio = c / o
        min_ratio = min(min_ratio, ratio)
        if ratio > worst:
            worst, worst_t = ratio, t
    return {"maxRatio": worst, "minRatio": min_ratio if math.isfinite(min_ratio) else 1.0,
            "samples": len(queries), "worstQuery": list(worst_t) if worst_t else None,
            "zeroCostConsistent": zero_ok, "guaranteeFactor": diagram.guarantee_factor}


def sample_translations(diagram, A, B, count, seed):
    gen = np.random.Generator(np.random.PCG64(seed))
    S = diagram.site_array
    lo, hi = S.min(axis=0), S.max(axis=0)
    pad = 0.25 * float(np.max(hi - lo)) + 1.0
    scales = [v for v in (diagram.site_scales or []) if v and v > 0]
    typical = float(np.median(scales)) if scales else pad / 4
    out = []
    for q in range(count):
        mode = q % 3
        if mode == 0 or not len(S):
            t = gen.uniform(lo - pad, hi + pad)
        elif mode == 1:
            s = int(gen.integers(0, len(S)))
            sc = diagram.site_scales[s] if diagram.site_scales and diagram.site_scales[s] else typical
            t = S[s] + gen.normal(0.0, sc, size=2)
        else:
            s = int(gen.integers(0, len(S)))
            sc = diagram.site_scales[s] if diagram.site_scales and diagram.site_scales[s] else typical
            levels = diagram.site_levels[s] if diagram.site_levels else 0
            i = int(gen.integers(0, levels + 1))
            half = 2.0 ** (i - 1) * sc
            along = gen.uniform(-half, half)
            side = int(gen.integers(0, 4))
            jitter = half * 1e-6 * gen.choice([-1.0, 1.0])
            edge = half + jitter
            offs = [(edge, along), (-edge, along), (along, edge), (along, -edge)][side]
            t = S[s] + np.array(offs)
        out.append(Translation(float(t[0]), float(t[1])))
    return out


# -- Voronoi cells -----------------------------------------------------------------------

def _clip(poly, nx, ny, c):
    """Keep the part of ``poly`` with nx*x + ny*y <= c."""
    out = []
    for q in range(len(poly)):
        P, Q = poly[q], poly[(q + 1) % len(poly)]
        fp = nx * P[0] + ny * P[1] - c
        fq = nx * Q[0] + ny * Q[1] - c
        if fp <= 0:
            out.append(P)
        if (fp < 0 < fq) or (fq < 0 < fp):
            r = fp / (fp - fq)
            out.append((P[0] + r * (Q[0] - P[0]), P[1] + r * (Q[1] - P[1])))
    return out


def voronoi_cell_polygon(sites, index: int, clip_box) -> list[tuple[float, float]]:
    """Voronoi cell of ``sites[index]`` clipped to (xmin, ymin, xmax, ymax),
    as a counter-clockwise vertex list."""
    S = as_array(sites, "sites")
    xmin, ymin, xmax, ymax = map(float, clip_box)
    poly = [(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)]
    si = S[index]
    for j, sj in enumerate(S):
        if j == index or not poly:
            continue
        nx, ny = sj[0] - si[0], sj[1] - si[1]
        c = (sj @ sj - si @ si) / 2
        poly = _clip(poly, float(nx), float(ny), float(c))
    return poly


def polygon_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    x = np.array([q[0] for q in poly])
    y = np.array([q[1] for q in poly])
    return float(0.5 * (x @ np.roll(y, -1) - y @ np.roll(x, -1)))


# -- serialization -------------------------------------------------------------------------

def to_json(diagram: MatchingDiagram) -> dict:
    faces = []
    for key, f in sorted(diagram.faces.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2:])):
        faces.append({
            "site": f.site, "region": f.region, "level": f.level, "i": f.i, "j": f.j,
            "depth": f.depth, "center": [f.center[0], f.center[1]],
            "centerCost": f.center_cost, "refined": f.refined,
            "matching": [list(pq) for pq in f.matching],
        })
    p = "inf" if math.isinf(diagram.p) else diagram.p
    return {
        "instanceHash": diagram.instance_hash,
        "kind": diagram.kind,
        "eps": diagram.eps,
        "delta": diagram.delta,
        "p": p,
        "k": diagram.k,
        "levelCount": diagram.level_count,
        "guaranteeFactor": diagram.guarantee_factor,
        "siteKind": diagram.sites.kind,
        "sites": [[t[0], t[1]] for t in diagram.sites.translations],
        "perSiteBaseValue": list(diagram.base_values),
        "perSiteLevels": list(diagram.site_levels),
        "perSiteScale": list(diagram.site_scales),
        "memoizedFaces": faces,
    }


def from_json(doc: dict) -> MatchingDiagram:
    try:
        kind = doc["kind"]
        if kind not in KINDS:
            raise DiagramError(f"unknown diagram kind {kind!r}")
        p = math.inf if doc["p"] == "inf" else float(doc["p"])
        sites = CandidateSet(tuple(Translation(float(x), float(y)) for x, y in doc["sites"]),
                             doc.get("siteKind", "POINT_TO_POINT"))
        d = MatchingDiagram(doc["instanceHash"], kind, p, int(doc["k"]), sites,
                            eps=float(doc.get("eps", 0.0)), delta=float(doc.get("delta", 0.0)),
                            level_count=int(doc.get("levelCount", 0)),
                            base_values=list(doc.get("perSiteBaseValue", [])),
                            site_levels=[int(v) for v in doc.get("perSiteLevels", [])],
                            site_scales=list(doc.get("perSiteScale", [])),
                            guarantee_factor=float(doc["guaranteeFactor"]))
        for f in doc.get("memoizedFaces", []):
            face = DiagramFace(int(f["site"]), f["region"], int(f["level"]), int(f["i"]),
                               int(f["j"]), int(f.get("depth", 0)),
                               Translation(*map(float, f["center"])),
                               canonical(f["matching"]), f.get("centerCost"),
                               bool(f.get("refined", False)))
            d.faces.put(face.key, face)
    except (KeyError, TypeError, ValueError) as exc:
        raise DiagramError(f"malformed diagram document: {exc}") from None
    return d
