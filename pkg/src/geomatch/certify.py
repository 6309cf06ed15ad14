"""Certified reference value for the optimum over all translations.

Independent of the search code: it evaluates optcost by full enumeration
(``brute_force_costs``) on an adaptively refined square grid and uses the
1-Lipschitz property of optcost to turn grid samples into a guaranteed
interval ``lower <= min_t optcost(t) <= upper``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Translation, as_array, check_exponent
from .matching import brute_force_costs


@dataclass(frozen=True)
class CertifiedOptimum:
    lower: float
    upper: float
    translation: Translation
    samples: int


def certified_optimum(A, B, k: int, p, rel_width: float = 0.01,
                      max_rounds: int = 40) -> CertifiedOptimum:
    A = as_array(A, "A")
    B = as_array(B, "B")
    p = check_exponent(p)
    T = (B[None, :, :] - A[:, None, :]).reshape(-1, 2)
    vals = brute_force_costs(A, B, k, p, T)
    samples = len(T)
    i = int(np.argmin(vals))
    best, best_t = float(vals[i]), T[i]
    if best == 0.0:
        return CertifiedOptimum(0.0, 0.0, Translation(*map(float, best_t)), samples)

    # every optimum lies within `best` of T (each matched edge is at least
    # the distance to the nearest point-to-point translation)
    lo = T.min(axis=0) - best
    hi = T.max(axis=0) + best
    side = best
    nx, ny = (int(math.ceil((hi - lo)[d] / side)) for d in (0, 1))
    gx, gy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    centers = lo + (np.stack([gx.ravel(), gy.ravel()], axis=1) + 0.5) * side
    floor_seen = math.inf
    for _ in range(max_rounds):
        half = side / math.sqrt(2.0)
        dT = np.sqrt(((centers[:, None, :] - T[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
        keep = dT - half < best * (1 - rel_width)
        if np.any(~keep):
            floor_seen = min(floor_seen, float((dT[~keep] - half).min()))
        centers = centers[keep]
        if len(centers) == 0:
            break
        vals = brute_force_costs(A, B, k, p, centers)
        samples += len(centers)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, best_t = float(vals[j]), centers[j]
        lb = vals - half
        keep = lb < best * (1 - rel_width)
        if np.any(~keep):
            floor_seen = min(floor_seen, float(lb[~keep].min()))
        centers = centers[keep]
        if len(centers) == 0:
            break
        side /= 2
        q = side / 2
        centers = np.concatenate([centers + (dx, dy) for dx in (-q, q) for dy in (-q, q)])
    else:
        # out of rounds: the surviving cells still bound the optimum
        floor_seen = min(floor_seen, float((vals - half).min()))
    lower = max(0.0, min(best, floor_seen))
    return CertifiedOptimum(lower, best, Translation(float(best_t[0]), float(best_t[1])), samples)
