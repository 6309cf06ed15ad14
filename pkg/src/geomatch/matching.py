"""Minimum-cost k-matchings between stationary point sets.

``solve_exact`` is the workhorse: successive shortest paths on the
source -> A -> B -> sink network for finite p, and a threshold search with
augmenting-path feasibility tests for p = inf.  ``brute_force_oracle``
enumerates every k-matching and exists to check it.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, as_array, check_exponent, lp_mean

ORACLE_LIMIT = 10**7

Matching = tuple  # tuple of (a_index, b_index) pairs, sorted by a_index


class MatchingError(GeometryError):
    pass


@dataclass(frozen=True)
class MatchResult:
    matching: tuple
    cost: float
    exact: bool = True
    eps_used: float = 0.0


def canonical(pairs) -> tuple:
    return tuple(sorted((int(a), int(b)) for a, b in pairs))


def check_matching(M, m: int, n: int, k: int | None = None) -> None:
    a_seen, b_seen = set(), set()
    for a, b in M:
        if not (0 <= a < m and 0 <= b < n):
            raise MatchingError("index out of range")
        if a in a_seen or b in b_seen:
            raise MatchingError("matching reuses a point")
        a_seen.add(a)
        b_seen.add(b)
    if k is not None and len(M) != k:
        raise MatchingError(f"matching has {len(M)} pairs, expected {k}")


def _prepare(A, B, k, p, t):
    A = as_array(A, "A")
    B = as_array(B, "B")
    if len(A) == 0 or len(B) == 0:
        raise MatchingError("empty point set")
    if not 1 <= k <= min(len(A), len(B)):
        raise MatchingError(f"infeasible size k={k} for m={len(A)}, n={len(B)}")
    p = check_exponent(p)
    t = np.asarray(t, dtype=float)
    diff = A[:, None, :] + t - B[None, :, :]
    return A, B, p, np.hypot(diff[..., 0], diff[..., 1])


def _ssp(weight: list[list[float]], k: int) -> list[tuple[int, int]]:
    """k augmentations of successive shortest paths with node potentials.

    ``weight`` is an m x n matrix of nonnegative arc costs.  Node layout:
    0 = source, 1..m = A, m+1..m+n = B, m+n+1 = sink.  Dijkstra runs on
    reduced costs, which stay nonnegative because potentials are updated
    with the previous shortest-path distances.
    """
    m, n = len(weight), len(weight[0])
    V = m + n + 2
    sink = V - 1
    match_a = [-1] * m
    match_b = [-1] * n
    pot = [0.0] * V
    inf = math.inf
    for _ in range(k):
        dist = [inf] * V
        prev = [-1] * V
        done = [False] * V
        dist[0] = 0.0
        for _ in range(V):
            u, du = -1, inf
            for v in range(V):
                if not done[v] and dist[v] < du:
                    u, du = v, dist[v]
            if u < 0:
                break
            done[u] = True
            pu = pot[u] + du
            if u == 0:
                for i in range(m):
                    if match_a[i] < 0 and not done[1 + i]:
                        v = 1 + i
                        nd = pu - pot[v]
                        if nd < dist[v]:
                            dist[v], prev[v] = nd, u
            elif u <= m:
                i = u - 1
                row = weight[i]
                for j in range(n):
                    v = 1 + m + j
                    if match_a[i] == j or done[v]:
                        continue
                    nd = pu + row[j] - pot[v]
                    if nd < dist[v]:
                        dist[v], prev[v] = nd, u
            elif u < sink:
                j = u - 1 - m
                i = match_b[j]
                if i >= 0:
                    v = 1 + i
                    nd = pu - weight[i][j] - pot[v]
                else:
                    v = sink
                    nd = pu - pot[v]
                # roundoff can make a reduced cost slightly negative; never
                # reopen a settled node or prev[] may form a cycle
                if not done[v] and nd < dist[v]:
                    dist[v], prev[v] = nd, u
        if dist[sink] == inf:
            raise MatchingError("no augmenting path")
        for v in range(V):
            # unreached nodes get the sink distance; keeps reduced costs >= 0
            pot[v] += min(dist[v], dist[sink])
        v = prev[sink]
        while v != 0:
            u = prev[v]
            if u == 0:
                break
            j, i = v - 1 - m, u - 1
            # u is an A node and v a B node on a forward arc
            match_a[i], match_b[j] = j, i
            v = prev[u]
    return [(i, match_a[i]) for i in range(m) if match_a[i] >= 0]


def _max_matching(adj: list[list[int]], n: int, need: int) -> list[int] | None:
    """Augmenting-path bipartite matching; stops once ``need`` pairs exist.

    Returns match_a (length m, -1 for free) or None if fewer than ``need``.
    """
    m = len(adj)
    match_a = [-1] * m
    match_b = [-1] * n
    size = 0

    def augment(i, seen):
        for j in adj[i]:
            if seen[j]:
                continue
            seen[j] = True
            if match_b[j] < 0 or augment(match_b[j], seen):
                match_a[i], match_b[j] = j, i
                return True
        return False

    for i in range(m):
        if size >= need:
            break
        if augment(i, [False] * n):
            size += 1
    return match_a if size >= need else None


def _bottleneck(D: np.ndarray, k: int) -> list[tuple[int, int]]:
    m, n = D.shape
    levels = np.unique(D)
    lo, hi = 0, len(levels) - 1
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        thr = levels[mid]
        adj = [[int(j) for j in np.flatnonzero(D[i] <= thr)] for i in range(m)]
        found = _max_matching(adj, n, k)
        if found is None:
            lo = mid + 1
        else:
            best, hi = found, mid - 1
    pairs = [(i, j) for i, j in enumerate(best) if j >= 0]
    return pairs[:k]


def solve_exact(A, B, k: int, p, t=(0.0, 0.0)) -> MatchResult:
    """Minimum L_p-cost k-matching between A + t and B."""
    A, B, p, D = _prepare(A, B, k, p, t)
    if math.isinf(p):
        pairs = _bottleneck(D, k)
    else:
        top = D.max()
        scaled = (D / top) ** p if top > 0 else D
        pairs = _ssp(scaled.tolist(), k)
    pairs = canonical(pairs)
    return MatchResult(pairs, _cost_from_matrix(D, pairs, p), True, 0.0)


def solve_within(A, B, k: int, p, t=(0.0, 0.0), eps: float = 0.0) -> MatchResult:
    """(1 + eps)-approximate k-matching.  Backed by the exact solver."""
    if not eps >= 0:
        raise MatchingError("eps must be >= 0")
    res = solve_exact(A, B, k, p, t)
    return MatchResult(res.matching, res.cost, True, float(eps))


def _cost_from_matrix(D, pairs, p) -> float:
    return lp_mean([D[a, b] for a, b in pairs], p)


def matching_count(m: int, n: int, k: int) -> int:
    return math.comb(m, k) * math.comb(n, k) * math.factorial(k)


def _check_oracle_size(m, n, k):
    if matching_count(m, n, k) > ORACLE_LIMIT:
        raise MatchingError("instance too large for oracle")


def enumerate_matchings(m: int, n: int, k: int):
    """Yield every k-matching as a sorted pair tuple (a-combination order)."""
    for acomb in itertools.combinations(range(m), k):
        for bperm in itertools.permutations(range(n), k):
            yield tuple(zip(acomb, bperm))


def _powered(D: np.ndarray, p: float):
    """Per-translation normalized p-th powers and the normalizers
    (leading axis = translation)."""
    top = D.reshape(len(D), -1).max(axis=1)
    top = np.where(top > 0, top, 1.0)
    return (D / top[:, None, None]) ** p, top


def brute_force_oracle(A, B, k: int, p, t=(0.0, 0.0)) -> MatchResult:
    """Minimum over every k-matching; ties go to the lexicographically
    smallest pair list."""
    A, B, p, D = _prepare(A, B, k, p, t)
    m, n = D.shape
    _check_oracle_size(m, n, k)
    perms = np.array(list(itertools.permutations(range(n), k)), dtype=np.intp).reshape(-1, k)
    rows = np.arange(k)
    W, top = (D, 1.0) if math.isinf(p) else _powered(D[None], p)
    W = W.reshape(m, n)
    best_val, cands = math.inf, []
    for comb in itertools.combinations(range(m), k):
        vals = W[list(comb)][rows, perms]
        agg = vals.max(axis=1) if math.isinf(p) else vals.sum(axis=1)
        low = float(agg.min())
        slack = 1e-12 * max(1.0, low)
        if low < best_val - slack:
            best_val, cands = low, []
        if low <= best_val + slack:
            for r in np.flatnonzero(agg <= best_val + slack):
                cands.append((float(agg[r]), tuple(zip(comb, perms[r].tolist()))))
    floor = min(c for c, _ in cands)
    best = min(M for c, M in cands if c <= floor + 1e-12 * max(1.0, floor))
    return MatchResult(best, _cost_from_matrix(D, best, p), True, 0.0)


def brute_force_costs(A, B, k: int, p, ts, chunk: int = 4_000_000) -> np.ndarray:
    """optcost at many translations at once, by full enumeration.

    Vectorized over translations; shares no code with the flow solver, so it
    can serve as an independent reference for it.
    """
    A = as_array(A, "A")
    B = as_array(B, "B")
    p = check_exponent(p)
    m, n = len(A), len(B)
    if not 1 <= k <= min(m, n):
        raise MatchingError(f"infeasible size k={k}")
    _check_oracle_size(m, n, k)
    ts = as_array(ts, "translations")
    perms = np.array(list(itertools.permutations(range(n), k)), dtype=np.intp).reshape(-1, k)
    combos = list(itertools.combinations(range(m), k))
    rows = np.arange(k)
    step = max(1, chunk // max(1, len(perms) * k))
    out = np.empty(len(ts))
    for s in range(0, len(ts), step):
        tt = ts[s:s + step]
        diff = A[None, :, None, :] + tt[:, None, None, :] - B[None, None, :, :]
        D = np.hypot(diff[..., 0], diff[..., 1])
        W, top = (D, None) if math.isinf(p) else _powered(D, p)
        best = np.full(len(tt), np.inf)
        for comb in combos:
            sub = W[:, list(comb), :]            # (N, k, n)
            vals = sub[:, rows, perms]            # (N, P, k)
            agg = vals.max(axis=2) if math.isinf(p) else vals.sum(axis=2)
            np.minimum(best, agg.min(axis=1), out=best)
        if not math.isinf(p):
            best = top * (best / k) ** (1.0 / p)
        out[s:s + step] = best
    return out
