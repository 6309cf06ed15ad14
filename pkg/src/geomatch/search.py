"""Searching the translation plane for a good (translation, matching) pair.

All searches reduce to running the stationary solver at a finite set of
candidate translations and keeping the best result.  Ties are broken by
cost, then lexicographically by translation.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .geometry import Disk, GeometryError, Translation, as_array, check_exponent
from .matching import MatchingError, solve_within
from .parallel import map_ordered

POINT_TO_POINT = "POINT_TO_POINT"
CLUSTER_CENTERS = "CLUSTER_CENTERS"


@dataclass(frozen=True)
class CandidateSet:
    translations: tuple
    kind: str
    radii: tuple | None = None
    # how many (a, b) pairs produced each point-to-point translation
    multiplicity: tuple | None = None

    def __len__(self):
        return len(self.translations)

    def array(self) -> np.ndarray:
        return np.array(self.translations, dtype=float).reshape(-1, 2)

    def expanded(self) -> np.ndarray:
        """Translations repeated by multiplicity (the multiset T)."""
        arr = self.array()
        if self.multiplicity is None:
            return arr
        return np.repeat(arr, self.multiplicity, axis=0)


@dataclass(frozen=True)
class SearchResult:
    translation: Translation
    matching: tuple
    cost: float
    algorithm: str
    candidates_evaluated: int
    guarantee_factor: float
    solves: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "candidatesEvaluated": self.candidates_evaluated,
            "cost": self.cost,
            "guaranteeFactor": self.guarantee_factor,
            "matching": [list(pq) for pq in self.matching],
            "solves": self.solves,
            "translation": [self.translation.dx, self.translation.dy],
            **self.extra,
        }


def _instance(A, B, k, p):
    A = as_array(A, "A")
    B = as_array(B, "B")
    if len(A) == 0 or len(B) == 0:
        raise GeometryError("empty point set")
    p = check_exponent(p)
    if not 1 <= k <= min(len(A), len(B)):
        raise MatchingError(f"infeasible size k={k} for m={len(A)}, n={len(B)}")
    return A, B, int(k), p


def _better(cost, t, best) -> bool:
    return best is None or (cost, t[0], t[1]) < (best[0], best[1][0], best[1][1])


def build_point_to_point_set(A, B) -> CandidateSet:
    """All differences b - a, deduplicated exactly, in (a, b) order."""
    A = as_array(A, "A")
    B = as_array(B, "B")
    if len(A) == 0 or len(B) == 0:
        raise GeometryError("empty point set")
    seen: dict = {}
    for a in A:
        for b in B:
            # + 0.0 folds -0.0 into 0.0
            key = (float(b[0] - a[0]) + 0.0, float(b[1] - a[1]) + 0.0)
            seen[key] = seen.get(key, 0) + 1
    return CandidateSet(tuple(Translation(*key) for key in seen), POINT_TO_POINT,
                        multiplicity=tuple(seen.values()))


def _evaluate_all(A, B, k, p, ts, eps):
    """Solve at every translation; returns (cost, t, matching) of the best."""
    results = map_ordered(lambda t: solve_within(A, B, k, p, t, eps), ts)
    best = None
    for t, res in zip(ts, results):
        if _better(res.cost, t, best):
            best = (res.cost, Translation(float(t[0]), float(t[1])), res.matching)
    return best


def const_factor_search(A, B, k, p, delta: float = 0.0) -> SearchResult:
    """Best solution over the point-to-point translations.

    Guarantee 2(1 + delta), or sqrt(2)(1 + delta) for p = 2.
    """
    A, B, k, p = _instance(A, B, k, p)
    T = build_point_to_point_set(A, B)
    cost, t, M = _evaluate_all(A, B, k, p, T.translations, delta)
    factor = (math.sqrt(2.0) if p == 2 else 2.0) * (1 + delta)
    return SearchResult(t, M, cost, "exhaustive", len(T), factor, solves=len(T))


# -- lower bounds and grid branch-and-bound ---------------------------------

def optcost_lower_bounds(A, B, k, p, ts) -> np.ndarray:
    """Cheap lower bounds on optcost at many translations.

    Any k-matching uses k distinct points of A, each paying at least its
    nearest-neighbour distance in B (and symmetrically for B); the L_p mean
    of the k smallest such distances bounds the cost from below.  The bound
    is 1-Lipschitz in the translation.
    """
    ts = np.asarray(ts, dtype=float).reshape(-1, 2)
    diff = A[None, :, None, :] + ts[:, None, None, :] - B[None, None, :, :]
    D = np.hypot(diff[..., 0], diff[..., 1])
    out = None
    for near in (D.min(axis=2), D.min(axis=1)):
        small = np.sort(near, axis=1)[:, :k]
        if math.isinf(p):
            val = small[:, -1]
        else:
            top = small[:, -1]
            safe = np.where(top > 0, top, 1.0)
            val = top * np.mean((small / safe[:, None]) ** p, axis=1) ** (1.0 / p)
        out = val if out is None else np.maximum(out, val)
    # rounding slack so the bound never exceeds the solver's value
    return out - 1e-12 * (1.0 + out)


@dataclass
class _GridDisk:
    center: tuple
    radius: float
    j_lo: int
    lo: np.ndarray
    hi: np.ndarray


def _grid_minimum(A, B, k, p, disks, side, eps, leaf: int = 256):
    """min over every grid vertex covering every disk of solve_within cost.

    Best-first branch and bound over blocks of vertex indices; a block is
    discarded only when the Lipschitz lower bound proves that none of its
    vertices can beat the current best, so the result equals exhaustive
    evaluation.  Returns (best, candidate_count, solve_count).
    """
    grids = []
    total = 0
    for c, r in disks:
        j_lo, lo, hi = geo.covering_vertex_rows(c, r, side)
        grids.append(_GridDisk((float(c[0]), float(c[1])), r, j_lo, lo, hi))
        total += int(np.sum(hi - lo + 1))

    heap: list = []
    counter = 0

    def push_block(g, i0, i1, j0, j1):
        nonlocal counter
        cx, cy = grids[g].center
        xa, xb = cx + i0 * side, cx + i1 * side
        ya, yb = cy + j0 * side, cy + j1 * side
        mid = ((xa + xb) / 2, (ya + yb) / 2)
        half = math.hypot(xb - xa, yb - ya) / 2
        bound = float(optcost_lower_bounds(A, B, k, p, [mid])[0]) - half
        heapq.heappush(heap, (bound, counter, 0, (g, i0, i1, j0, j1)))
        counter += 1

    for g, gd in enumerate(grids):
        j1 = gd.j_lo + len(gd.lo) - 1
        push_block(g, int(gd.lo.min()), int(gd.hi.max()), gd.j_lo, j1)

    best = None
    solves = 0
    while heap:
        bound, _, kind, payload = heapq.heappop(heap)
        if best is not None and bound > best[0]:
            break
        if kind == 1:
            t = payload
            res = solve_within(A, B, k, p, t, eps)
            solves += 1
            if _better(res.cost, t, best):
                best = (res.cost, t, res.matching)
            continue
        g, i0, i1, j0, j1 = payload
        gd = grids[g]
        # clip to rows that hold member vertices
        rs = np.arange(j0, j1 + 1) - gd.j_lo
        lo = np.maximum(gd.lo[rs], i0)
        hi = np.minimum(gd.hi[rs], i1)
        if np.all(hi < lo):
            continue
        if (i1 - i0 + 1) * (j1 - j0 + 1) > leaf:
            im, jm = (i0 + i1) // 2, (j0 + j1) // 2
            for a0, a1 in ((i0, im), (im + 1, i1)):
                for b0, b1 in ((j0, jm), (jm + 1, j1)):
                    if a0 <= a1 and b0 <= b1:
                        push_block(g, a0, a1, b0, b1)
            continue
        cx, cy = gd.center
        pts = [(cx + i * side, cy + (j0 + r) * side)
               for r in range(len(rs)) for i in range(int(lo[r]), int(hi[r]) + 1)]
        if not pts:
            continue
        lbs = optcost_lower_bounds(A, B, k, p, pts)
        for t, lb in zip(pts, lbs):
            if best is None or lb <= best[0]:
                heapq.heappush(heap, (float(lb), counter, 1, Translation(*t)))
                counter += 1
    return best, total, solves


def eps_optimum_search(A, B, k, p, eps: float) -> SearchResult:
    """(1 + eps)-approximate optimum via eps-grids around point-to-point
    translations."""
    if not 0 < eps <= 1:
        raise GeometryError("eps must lie in (0, 1]")
    A, B, k, p = _instance(A, B, k, p)
    base = const_factor_search(A, B, k, p, delta=0.5)
    if base.cost == 0.0:
        return SearchResult(base.translation, base.matching, 0.0, "grid",
                            base.candidates_evaluated, 1 + eps, solves=base.solves)
    r0 = 2.0 * base.cost
    side = eps * math.sqrt(2.0) * r0 / 18.0
    T = build_point_to_point_set(A, B)
    best, count, solves = _grid_minimum(A, B, k, p, [(t0, r0) for t0 in T.translations],
                                        side, eps / 2)
    cost, t, M = best
    return SearchResult(t, M, cost, "grid", count, 1 + eps, solves=solves + base.solves,
                        extra={"r0": r0, "side": side})


# -- randomized search ---------------------------------------------------------

def close_pair_count_bound(k: int, c: float, p) -> float:
    """Lower bound on the number of pairs shorter than (1 + c) * cost."""
    if k < 1 or not 0 < c <= 1:
        raise GeometryError("need k >= 1 and 0 < c <= 1")
    p = check_exponent(p)
    if math.isinf(p):
        return float(k)
    return k - k / (1 + c) ** p


def success_probability_bound(m: int, k: int, p, eps: float, s: int) -> float:
    p = check_exponent(p)
    if not (1 <= k <= m and s >= 1 and 0 < eps <= 1):
        raise GeometryError("need 1 <= k <= m, s >= 1, 0 < eps <= 1")
    hit = 1.0 if math.isinf(p) else -math.expm1(-eps * p / 8)
    miss = 1.0 - hit * k / m
    return min(1.0, max(0.0, 1.0 - miss ** s))


def random_sample_search(A, B, k, p, eps: float, s: int, seed: int) -> SearchResult:
    """Monte Carlo (2 + eps)-approximation.

    Each of the ``s`` rounds draws an index ``i = gen.integers(0, m)`` from
    ``numpy.random.Generator(PCG64(seed))`` and tries every translation
    b - A[i].
    """
    if s < 1:
        raise GeometryError("s must be >= 1")
    A, B, k, p = _instance(A, B, k, p)
    gen = np.random.Generator(np.random.PCG64(seed))
    best = None
    drawn = []
    for _ in range(s):
        i = int(gen.integers(0, len(A)))
        drawn.append(i)
        ts = [Translation(float(b[0] - A[i][0]) + 0.0, float(b[1] - A[i][1]) + 0.0) for b in B]
        cand = _evaluate_all(A, B, k, p, ts, eps / 4)
        if _better(cand[0], cand[1], best):
            best = cand
    cost, t, M = best
    return SearchResult(t, M, cost, "random", s * len(B), 2 + eps, solves=s * len(B),
                        extra={"sampled": drawn})


# -- disk-eating clustering -----------------------------------------------------

def build_cluster_centers(T: CandidateSet, k: int) -> CandidateSet:
    """Greedy disk eating over the point-to-point multiset.

    Repeatedly takes a (2-approximately) smallest disk holding ceil(k/2) of
    the remaining points, records its center and removes what it covers;
    a final remainder of at most ceil(k/2) points gets its exact enclosing
    disk.
    """
    if len(T) == 0 or k < 1:
        raise GeometryError("need a nonempty candidate set and k >= 1")
    h = math.ceil(k / 2)
    P = T.expanded()
    centers, radii = [], []
    while len(P):
        if len(P) <= h:
            D = geo.min_enclosing_disk(P)
        else:
            D = geo.approx_smallest_hdisk(P, h)
        d = np.hypot(P[:, 0] - D.center[0], P[:, 1] - D.center[1])
        covered = d <= D.radius * (1 + 1e-12) + 1e-12
        if len(P) > h and covered.sum() < h:
            raise AssertionError("cluster disk lost points")
        c = Translation(float(D.center[0]) + 0.0, float(D.center[1]) + 0.0)
        if c not in centers:
            centers.append(c)
            radii.append(D.radius)
        P = P[~covered]
    return CandidateSet(tuple(centers), CLUSTER_CENTERS, radii=tuple(radii))


def cluster_constant(p) -> float:
    """3 * 2^(1/p): how far any translation can be from its nearest center,
    relative to its optimal cost."""
    p = check_exponent(p)
    return 3.0 if math.isinf(p) else 3.0 * 2.0 ** (1.0 / p)


def disk_eating_search(A, B, k, p, eps: float, delta: float = 1.0) -> SearchResult:
    """Deterministic (1 + eps)-approximation from the cluster centers."""
    if not 0 < eps <= 1:
        raise GeometryError("eps must lie in (0, 1]")
    A, B, k, p = _instance(A, B, k, p)
    X = build_cluster_centers(build_point_to_point_set(A, B), k)
    cost, t, M = _evaluate_all(A, B, k, p, X.translations, delta)
    base_solves = len(X)
    if cost == 0.0:
        return SearchResult(t, M, 0.0, "cluster", len(X), 1 + eps, solves=base_solves)
    L = cluster_constant(p)
    v_low = cost / ((1 + L) * (1 + delta))
    radius = (1 + L + 4 * eps) * cost
    side = math.sqrt(2.0) * (eps / 3) * v_low
    best, count, solves = _grid_minimum(A, B, k, p, [(xi, radius) for xi in X.translations],
                                        side, eps / 2)
    cost, t, M = best
    return SearchResult(t, M, cost, "cluster", count + len(X), 1 + eps,
                        solves=solves + base_solves,
                        extra={"clusters": len(X), "radius": radius, "side": side})
