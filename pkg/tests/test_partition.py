from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polypart.harness.generators import generate_points
from polypart.partition import (PartitionConfig, PartitionError, PointMultiset, exact_small_ham_sandwich,
                                ham_sandwich_cut, monomial_exponents, partitioning_polynomial, round_schedule,
                                schedule_degree, veronese_lift)
from polypart.poly import RInterval, eval_box, eval_poly

F = Fraction


def side_counts(h, S: PointMultiset):
    pos = sum(m for p, m in zip(S.points, S.multiplicities) if eval_poly(h, p) > 0)
    neg = sum(m for p, m in zip(S.points, S.multiplicities) if eval_poly(h, p) < 0)
    return pos, neg


# ---- veronese
def test_veronese_examples():
    assert veronese_lift((3,), 2) == (3, 9)
    assert veronese_lift((F(1, 2), 5), 1) == (F(1, 2), 5)
    assert veronese_lift((1, 2), 2) == (1, 2, 1, 2, 4)
    assert monomial_exponents(2, 2) == [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_veronese_rejects_degree_zero():
    with pytest.raises(ValueError):
        veronese_lift((1, 2), 0)


@pytest.mark.parametrize("s,k,D", [(1, 2, 1), (2, 2, 1), (4, 2, 2), (8, 2, 3), (16, 2, 5), (5, 2, 2), (6, 2, 3),
                                   (3, 1, 3), (4, 3, 2)])
def test_schedule_degree(s, k, D):
    assert schedule_degree(s, k) == D


@given(st.integers(1, 300), st.integers(1, 4))
def test_schedule_degree_is_minimal(s, k):
    D = schedule_degree(s, k)
    assert comb(D + k, k) - 1 >= s
    assert D == 1 or comb(D - 1 + k, k) - 1 < s


def test_round_schedule_r16():
    assert round_schedule(16, 2) == [1, 1, 2, 3]
    assert sum(round_schedule(16, 2)) == 7


# ---- ham sandwich
def test_single_set_median():
    S = PointMultiset(((1,), (2,), (3,), (4,)))
    h = ham_sandwich_cut([S], rng=0)
    assert h.total_degree == 1
    root = -F(h.coefficient((0,))) / F(h.coefficient((1,)))
    assert 2 <= root <= 3
    assert all(c <= 2 for c in side_counts(h, S))


def test_two_sets_in_plane_against_exhaustive_oracle():
    A = PointMultiset(((0, 0), (1, 0), (0, 1), (1, 1), (F(1, 2), 2)))
    B = PointMultiset(((5, 5), (6, 5), (5, 7), (7, 6)))
    oracle = exact_small_ham_sandwich([A, B])
    assert oracle is not None
    h = ham_sandwich_cut([A, B], rng=1)
    for S in (A, B):
        # both routes bisect, each checked by direct counting
        assert all(2 * c <= S.size for c in side_counts(h, S))
        assert all(2 * c <= S.size for c in side_counts(oracle, S))


def test_degenerate_multiset():
    S = PointMultiset(((1, 1),), (), (4,))
    h = ham_sandwich_cut([S], rng=0)
    assert side_counts(h, S) == (0, 0)


def test_ham_sandwich_input_checks():
    S = PointMultiset(((1,), (2,)))
    with pytest.raises(ValueError):
        ham_sandwich_cut([S, S], rng=0)
    with pytest.raises(ValueError):
        ham_sandwich_cut([S], beta=F(1, 3))


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_ham_sandwich_verified_in_lifted_space(seed, nsets):
    rng = np.random.default_rng(seed)
    sets = [PointMultiset(tuple(tuple(F(int(v), 64) for v in row) for row in rng.integers(0, 64, (7, 4))))
            for _ in range(nsets)]
    h = ham_sandwich_cut(sets, rng=seed)
    for S in sets:
        assert all(2 * c <= S.size for c in side_counts(h, S))


# ---- partitioning polynomial
def test_points_on_a_line_r2():
    Q = PointMultiset(tuple((i, 0) for i in range(1, 9)))
    res = partitioning_polynomial(Q, 2, PartitionConfig(seed=0))
    assert len(res.cuts) == 1 and res.degree == 1
    assert all(c <= 4 for c in side_counts(res.g, Q))


def test_small_r_single_cut():
    Q = generate_points("uniform", 40, seed=3)
    res = partitioning_polynomial(Q, F(3, 2), PartitionConfig(seed=0))
    assert res.degree == 1 and res.max_cell() <= F(40) / F(3, 2)


def test_uniform_4096_r16_matches_schedule():
    Q = generate_points("uniform", 4096, seed=11)
    res = partitioning_polynomial(Q, 16, PartitionConfig(seed=5))
    assert res.stats["round_degrees"] == [1, 1, 2, 3]
    assert res.degree == 7 <= 16
    assert res.max_cell() <= 256


def test_r_must_exceed_one():
    Q = PointMultiset(((0, 0), (1, 1)))
    with pytest.raises(ValueError):
        partitioning_polynomial(Q, 1)


def test_degree_cap_violation_raises():
    Q = generate_points("uniform", 500, seed=2)
    with pytest.raises(PartitionError):
        partitioning_polynomial(Q, 16, PartitionConfig(seed=0, degree_cap=3))


def test_degree_ledger_equals_schedule_sum():
    Q = generate_points("uniform", 1500, seed=4)
    res = partitioning_polynomial(Q, 8, PartitionConfig(seed=1))
    assert res.degree == res.g.total_degree == sum(c.degree for c in res.cuts)
    assert res.degree == res.stats["schedule_degree"]


def test_multiset_doubling():
    Q = generate_points("uniform", 300, seed=8)
    Q2 = PointMultiset(Q.points, (), (2,) * len(Q))
    a = partitioning_polynomial(Q, 4, PartitionConfig(seed=3))
    b = partitioning_polynomial(Q2, 4, PartitionConfig(seed=3))
    assert b.max_cell() <= F(Q2.size, 4)
    assert np.array_equal(a.signs, b.signs)
    assert {k: 2 * v for k, v in a.cell_counts().items()} == b.cell_counts()


def _segment_sign_constant(p, a, b, pieces=32):
    """Certify ``p`` keeps one strict sign along segment ab by interval boxes."""
    sign = None
    for t in range(pieces):
        u0, u1 = F(t, pieces), F(t + 1, pieces)
        box = [RInterval(min(x + (y - x) * u0, x + (y - x) * u1), max(x + (y - x) * u0, x + (y - x) * u1))
               for x, y in zip(a, b)]
        s = eval_box(p, box).sign()
        if s == 0 or (sign is not None and s != sign):
            return False
        sign = s
    return True


def test_connected_pairs_share_sign_vectors():
    Q = generate_points("uniform", 600, seed=9)
    res = partitioning_polynomial(Q, 4, PartitionConfig(seed=2))
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(100):
        i, j = (int(v) for v in rng.integers(0, len(Q), 2))
        a, b = Q.points[i], Q.points[j]
        if all(_segment_sign_constant(c.poly, a, b) for c in res.cuts):
            checked += 1
            assert res.sign_vector(a) == res.sign_vector(b)
    assert checked > 0


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.integers(12, 80), st.sampled_from([2, 3, 4, F(5, 2)]))
def test_cell_bound_property(seed, n, r):
    Q = generate_points("uniform", n, seed=seed, grid=256)
    res = partitioning_polynomial(Q, r, PartitionConfig(seed=seed))
    assert res.max_cell() <= F(Q.size) / F(r)
    assert sum(res.cell_counts().values()) + res.stats["on_zero"] == Q.size
