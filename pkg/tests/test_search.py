import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from conftest import random_instance
from geomatch.certify import certified_optimum
from geomatch.geometry import GeometryError, cost_evaluate, covering_vertex_count, nearest_site
from geomatch.instances import gen_random_instance
from geomatch.matching import solve_exact
from geomatch.search import (CandidateSet, build_cluster_centers, build_point_to_point_set,
                             close_pair_count_bound, cluster_constant, const_factor_search,
                             disk_eating_search, eps_optimum_search, optcost_lower_bounds,
                             random_sample_search, success_probability_bound)

# certified [lower, upper] for min_t optcost(t), gen_random_instance(5, 6, 3, 2, 10.0, seed=11)
CERTIFIED = {
    1: (1.100133414496399, 1.1112117583904617),
    2: (1.139704518301019, 1.1510082442445815),
    math.inf: (1.1739722704513469, 1.1850544557892828),
}


@pytest.fixture(scope="module")
def seeded():
    A, B = gen_random_instance(5, 6, 3, 2, 10.0, seed=11).arrays()
    return A, B


@pytest.mark.parametrize("p", sorted(CERTIFIED))
def test_certified_oracle_frozen(seeded, p):
    A, B = seeded
    c = certified_optimum(A, B, 3, p)
    lo, hi = CERTIFIED[p]
    assert c.lower == pytest.approx(lo, abs=1e-12)
    assert c.upper == pytest.approx(hi, abs=1e-12)
    assert c.upper - c.lower <= 0.01 * c.upper + 1e-12


def test_point_to_point_examples():
    assert build_point_to_point_set([(0, 0)], [(5, 5)]).translations == ((5, 5),)
    assert set(build_point_to_point_set([(0, 0), (1, 0)], [(1, 0)]).translations) == {(1, 0), (0, 0)}
    T = build_point_to_point_set([(0, 0), (1, 0)], [(2, 0), (3, 0)])
    assert set(T.translations) == {(2, 0), (3, 0), (1, 0)}
    assert dict(zip(T.translations, T.multiplicity))[(2, 0)] == 2
    with pytest.raises(GeometryError):
        build_point_to_point_set([], [(1, 1)])


def test_point_to_point_dedup_example():
    # the two differences (2,0) produced by distinct pairs are stored once
    T = build_point_to_point_set([(0, 0), (1, 0)], [(2, 0), (3, 0)])
    assert len(T.translations) == len(set(T.translations)) == 3


@pytest.mark.parametrize("p", [1, 2, math.inf])
def test_searches_against_certified_oracle(seeded, p):
    A, B = seeded
    lo, hi = CERTIFIED[p]
    cf = const_factor_search(A, B, 3, p)
    assert lo - 1e-9 <= cf.cost <= cf.guarantee_factor * hi + 1e-9
    for eps in (1, 0.5, 0.25):
        for res in (eps_optimum_search(A, B, 3, p, eps), disk_eating_search(A, B, 3, p, eps)):
            assert lo - 1e-9 <= res.cost <= (1 + eps) * hi + 1e-9
            assert res.cost == pytest.approx(cost_evaluate(A, B, res.matching, res.translation, p), abs=1e-9)


def test_exact_copy_zero(rng):
    A = rng.uniform(0, 5, (4, 2))
    B = np.vstack([A + (3.0, -2.0), rng.uniform(0, 5, (2, 2))])
    res = const_factor_search(A, B, 4, 2)
    assert res.cost == 0.0 and res.translation == pytest.approx((3.0, -2.0))
    assert eps_optimum_search(A, B, 4, 1, 0.25).cost == 0.0
    assert disk_eating_search(A, B, 4, 1, 0.25).cost == 0.0
    for seed in range(5):
        assert random_sample_search(A, B, 4, 1, 1.0, 1, seed).cost == 0.0


def test_guarantee_factors(seeded):
    A, B = seeded
    assert const_factor_search(A, B, 3, 2).guarantee_factor == pytest.approx(math.sqrt(2))
    assert const_factor_search(A, B, 3, 1, 0.5).guarantee_factor == 3.0
    assert random_sample_search(A, B, 3, 1, 0.5, 2, 0).guarantee_factor == 2.5


def test_close_pair_bound_examples():
    assert close_pair_count_bound(8, 1, 1) == 4.0
    assert close_pair_count_bound(8, 1, math.inf) == 8.0
    assert close_pair_count_bound(9, 1, 2) == 6.75


@pytest.mark.parametrize("p", [1, 2, 3, math.inf])
def test_markov_close_pairs(rng, p):
    for _ in range(100):
        A, B = random_instance(rng, 5, 5)
        M = list(zip(range(4), rng.permutation(5)[:4]))
        mu = cost_evaluate(A, B, M, (0, 0), p)
        L = np.array([np.hypot(*(A[a] - B[b])) for a, b in M])
        for c in (0.25, 0.5, 1.0):
            assert np.sum(L < (1 + c) * mu) >= close_pair_count_bound(4, c, p) or mu == 0


def test_success_probability_examples():
    assert success_probability_bound(5, 5, 1, 1, 10**6) == pytest.approx(1.0, abs=1e-6)
    assert success_probability_bound(3, 3, 8 * math.log(2), 1, 1) == pytest.approx(0.5, abs=1e-12)
    getcontext().prec = 50
    expected = 1 - (1 - (1 - (Decimal(-1) / 8).exp()) / 2) ** 3
    assert success_probability_bound(4, 2, 1, 1, 3) == pytest.approx(float(expected), abs=1e-15)
    assert success_probability_bound(4, 2, math.inf, 1, 1) == 0.5


def test_random_search_is_deterministic(seeded):
    A, B = seeded
    r1 = random_sample_search(A, B, 3, 1, 1.0, 3, seed=42)
    r2 = random_sample_search(A, B, 3, 1, 1.0, 3, seed=42)
    assert r1 == r2
    assert r1.cost >= CERTIFIED[1][0] - 1e-9


def test_cluster_examples():
    T = CandidateSet(((0.0, 0.0), (0.1, 0.0), (5.0, 5.0), (5.1, 5.0)), "POINT_TO_POINT")
    X = build_cluster_centers(T, 4)
    assert len(X) == 2
    near = sorted(X.translations)
    assert math.dist(near[0], (0.05, 0)) <= 0.1 and math.dist(near[1], (5.05, 5)) <= 0.1
    one = build_cluster_centers(CandidateSet(((0.0, 0.0), (2.0, 0.0)), "POINT_TO_POINT"), 4)
    assert one.translations == ((1.0, 0.0),)


def test_cluster_size_bound(rng):
    for _ in range(10):
        T = CandidateSet(tuple(map(tuple, rng.uniform(0, 10, (40, 2)))), "POINT_TO_POINT")
        assert len(build_cluster_centers(T, 10)) <= 8


def test_greedy_radii_double_bound(rng):
    for _ in range(20):
        T = CandidateSet(tuple(map(tuple, rng.uniform(0, 10, (30, 2)))), "POINT_TO_POINT")
        r = build_cluster_centers(T, 6).radii
        # the last disk may be the exact enclosing disk of a small remainder
        for a, b in zip(r[:-2], r[1:-1]):
            assert a <= 2 * b + 1e-12


@pytest.mark.parametrize("p", [1, 2, math.inf])
def test_cluster_lemma(rng, p):
    A, B = random_instance(rng, 5, 6)
    X = build_cluster_centers(build_point_to_point_set(A, B), 3)
    L = cluster_constant(p)
    for t in rng.uniform(-12, 12, (60, 2)):
        _, d = nearest_site(t, X.array())
        assert d <= L * solve_exact(A, B, 3, p, t).cost + 1e-9


@pytest.mark.parametrize("p", [1, 2, math.inf])
def test_lemma3_lower_bound(rng, p):
    A, B = random_instance(rng, 4, 5)
    T = build_point_to_point_set(A, B).array()
    for t in rng.uniform(-12, 12, (50, 2)):
        opt = solve_exact(A, B, 3, p, t).cost
        assert opt >= nearest_site(t, T)[1] - 1e-9
        assert opt >= optcost_lower_bounds(A, B, 3, p, [t])[0] - 1e-9


def test_candidate_count_bound(seeded):
    A, B = seeded
    res = disk_eating_search(A, B, 3, 1, 0.25)
    per_disk = (2 * math.ceil(res.extra["radius"] / res.extra["side"]) + 2) ** 2
    assert res.candidates_evaluated - res.extra["clusters"] <= res.extra["clusters"] * per_disk
    assert covering_vertex_count(res.extra["radius"], res.extra["side"]) <= per_disk


def test_eps_range_checked(seeded):
    A, B = seeded
    with pytest.raises(GeometryError):
        eps_optimum_search(A, B, 3, 1, 0)
    with pytest.raises(GeometryError):
        disk_eating_search(A, B, 3, 1, 1.5)


def test_threads_do_not_change_results(seeded, monkeypatch):
    A, B = seeded
    serial = eps_optimum_search(A, B, 3, 2, 0.5)
    monkeypatch.setenv("GEOMATCH_THREADS", "4")
    assert eps_optimum_search(A, B, 3, 2, 0.5) == serial
    assert const_factor_search(A, B, 3, 2) == const_factor_search(A, B, 3, 2)
