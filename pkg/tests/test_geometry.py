import math

import numpy as np
import pytest

from conftest import exact_hdisk_radius
from geomatch.geometry import (Disk, GeometryError, GridSpec, Translation, approx_smallest_hdisk,
                               check_exponent, cost_evaluate, covering_vertex_count,
                               grid_vertices_covering_disk, lp_mean, min_enclosing_disk,
                               nearest_site)


def test_cost_345():
    assert cost_evaluate([(0, 0)], [(3, 4)], [(0, 0)], (0, 0), 1) == 5.0


def test_cost_max_and_rms():
    A, B, M = [(0, 0), (0, 0)], [(1, 0), (2, 0)], [(0, 0), (1, 1)]
    assert cost_evaluate(A, B, M, (0, 0), math.inf) == 2.0
    assert cost_evaluate(A, B, M, (0, 0), 2) == pytest.approx(math.sqrt(2.5), abs=1e-12)


def test_cost_errors():
    with pytest.raises(GeometryError, match="index out of range"):
        cost_evaluate([(0, 0)], [(1, 1)], [(0, 1)], (0, 0), 1)
    with pytest.raises(GeometryError, match="empty matching"):
        cost_evaluate([(0, 0)], [(1, 1)], [], (0, 0), 1)


def test_exponent_validation():
    assert check_exponent("inf") == math.inf
    for bad in (0.5, float("nan"), "x"):
        with pytest.raises(GeometryError):
            check_exponent(bad)


def test_non_finite_points_rejected():
    with pytest.raises(GeometryError):
        cost_evaluate([(0, math.nan)], [(1, 1)], [(0, 0)], (0, 0), 1)


def test_large_p_does_not_overflow():
    assert lp_mean([1e200, 3e200], 1e6) == pytest.approx(3e200, rel=1e-5)


def test_lp_mean_monotone_in_p(rng):
    for _ in range(50):
        L = rng.uniform(0, 5, 4)
        vals = [lp_mean(L, p) for p in (1, 1.5, 2, 3, 8, math.inf)]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
    assert abs(lp_mean([1, 2, 4], 64) - lp_mean([1, 2, 4], math.inf)) < 0.1
    # ratio >= 2 between the two longest lengths: convergence to the max is fast
    assert abs(lp_mean([1, 8], 64) - 8) < 0.1


@pytest.mark.parametrize("p", [1, 2, 3, math.inf])
def test_lipschitz_in_translation(rng, p):
    for _ in range(200):
        A, B = rng.uniform(0, 10, (4, 2)), rng.uniform(0, 10, (5, 2))
        M = list(zip(rng.permutation(4)[:3], rng.permutation(5)[:3]))
        t, d = rng.normal(0, 3, 2), rng.normal(0, 1, 2)
        assert cost_evaluate(A, B, M, t + d, p) <= cost_evaluate(A, B, M, t, p) + np.hypot(*d) + 1e-9


def test_rms_identity(rng):
    for _ in range(100):
        A, B = rng.uniform(0, 10, (4, 2)), rng.uniform(0, 10, (4, 2))
        M = [(0, 2), (1, 0), (3, 3)]
        t, d = rng.normal(0, 3, 2), rng.normal(0, 1, 2)
        v = np.array([A[a] + t - B[b] for a, b in M])
        lhs = cost_evaluate(A, B, M, t + d, 2) ** 2
        rhs = cost_evaluate(A, B, M, t, 2) ** 2 + 2 / 3 * (v.sum(axis=0) @ d) + d @ d
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_nearest_site_basic_and_ties():
    assert nearest_site((0, 0), [(1, 0), (0, 2)]) == (0, 1.0)
    assert nearest_site((3, 4), [(1, 0), (3, 4)]) == (1, 0.0)
    assert nearest_site((0, 0), [(1, 0), (-1, 0)])[0] == 1
    assert nearest_site((0, 0), [(-1, 0), (1, 0)])[0] == 0
    with pytest.raises(GeometryError):
        nearest_site((0, 0), [])


def test_nearest_site_permutation_invariant(rng):
    sites = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    for perm in (rng.permutation(4) for _ in range(10)):
        S = [sites[i] for i in perm]
        idx, _ = nearest_site((0, 0), S)
        assert S[idx] == (-1, 0)


def test_min_enclosing_disk_small():
    d = min_enclosing_disk([(0, 0)])
    assert (d.center, d.radius) == ((0, 0), 0)
    d = min_enclosing_disk([(0, 0), (2, 0)])
    assert d.center == (1, 0) and d.radius == 1
    with pytest.raises(GeometryError):
        min_enclosing_disk([])


def test_min_enclosing_disk_matches_support_enumeration(rng):
    for _ in range(20):
        P = rng.uniform(-5, 5, (10, 2))
        assert min_enclosing_disk(P).radius == pytest.approx(exact_hdisk_radius(P, 10), abs=1e-9)


def test_min_enclosing_disk_collinear():
    d = min_enclosing_disk([(0, 0), (1, 0), (3, 0), (2, 0)])
    assert d.center == pytest.approx((1.5, 0)) and d.radius == pytest.approx(1.5)


def test_hdisk_examples():
    d = approx_smallest_hdisk([(0, 0), (2, 0)], 2)
    assert d.radius == 2 and d.center in ((0, 0), (2, 0))
    P = [(5, 5)] * 3 + [(0, 0), (9, 1)]
    assert approx_smallest_hdisk(P, 3).radius == 0
    with pytest.raises(GeometryError):
        approx_smallest_hdisk(P, 6)


def test_hdisk_factor_two(rng):
    for size in (6, 12, 15):
        for h in (2, 4, size // 2):
            P = rng.uniform(0, 10, (size, 2))
            rho = exact_hdisk_radius(P, h)
            r = approx_smallest_hdisk(P, h).radius
            assert rho - 1e-9 <= r <= 2 * rho + 1e-9


def test_grid_cover_radius_18():
    D, side = Disk(Translation(0.0, 0.0), 18.0), math.sqrt(2)
    V = np.array(grid_vertices_covering_disk(D, side))
    rng = np.random.default_rng(1)
    r, a = 18 * np.sqrt(rng.uniform(0, 1, 2000)), rng.uniform(0, 2 * np.pi, 2000)
    Q = np.c_[r * np.cos(a), r * np.sin(a)]
    Q = np.vstack([Q, 18 * np.c_[np.cos(a), np.sin(a)]])
    nearest = np.min(np.hypot(Q[:, None, 0] - V[None, :, 0], Q[:, None, 1] - V[None, :, 1]), axis=1)
    assert nearest.max() <= 1 + 1e-9


def test_grid_cover_radius_zero():
    V = grid_vertices_covering_disk(Disk(Translation(2.0, 3.0), 0.0), 0.5)
    assert sorted(V) == [(2.0, 3.0), (2.0, 3.5), (2.5, 3.0), (2.5, 3.5)]


def _scan_count(radius, side):
    n = int(math.ceil(radius / side)) + 2
    verts = set()
    for i in range(-n, n):
        for j in range(-n, n):
            x0, y0 = i * side, j * side
            px, py = min(max(0.0, x0), x0 + side), min(max(0.0, y0), y0 + side)
            d = math.hypot(px, py)
            if d < radius or (d == radius and px != x0 + side and py != y0 + side):
                verts |= {(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)}
    return len(verts)


@pytest.mark.parametrize("radius,side", [(1.0, 0.25), (1.0, 0.3), (2.5, 1.0), (0.1, 1.0), (3.0, 0.7)])
def test_grid_cover_count_matches_scan(radius, side):
    assert covering_vertex_count(radius, side) == _scan_count(radius, side)
    assert len(grid_vertices_covering_disk(Disk(Translation(0.3, -1.0), radius), side)) == \
        _scan_count(radius, side)


def test_grid_cover_unit_disk_frozen():
    # the 64 cells of [-1,1]^2 minus 4 corners, plus the two cells touching
    # the disk at (1,0) and (0,1) with their closed edges: 81 - 4 + 2 + 2
    assert covering_vertex_count(1.0, 0.25) == 81


def test_grid_errors():
    with pytest.raises(GeometryError):
        grid_vertices_covering_disk(Disk(Translation(0.0, 0.0), 1.0), 0.0)
    with pytest.raises(GeometryError):
        Disk(Translation(0.0, 0.0), -1.0)


def test_gridspec_roundtrip():
    g = GridSpec(Translation(1.0, 2.0), 0.5, 0)
    assert g.vertex(2, -1) == (2.0, 1.5)
    assert g.cell_of((2.0, 1.5)) == (2, -1)
    assert g.cell_of((1.99, 1.49)) == (1, -2)
