from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polypart.cells import (And, Atom, BoxCover, Not, Or, Range, Verdict, classify, classify_many, count_crossed,
                            format_range, parse_range, refine_components)
from polypart.harness.generators import generate_points, generate_ranges
from polypart.multilevel import Region
from polypart.poly import LinearMap, MPoly, parse_poly

F = Fraction


def P(text, n=2):
    return parse_poly(text, n)


def make_region(points, cuts, sign_id, max_boxes=8):
    pts = [tuple(F(v) for v in p) for p in points]
    X = np.array([[float(v) for v in p] for p in pts]).reshape(len(pts), 2)
    reg = Region(1, 0, tuple(sign_id), pts[0] if pts else (), len(pts), F(len(pts)),
                 BoxCover.from_points(X, max_boxes), np.arange(len(pts)), LinearMap.identity(2), tuple(cuts), None, X)
    reg._points, reg._mult, reg._weights = tuple(pts), (1,) * len(pts), (1,) * len(pts)
    return reg


UNIT_SQUARE = [(0, 0), (1, 0), (0, 1), (1, 1), (F(1, 2), F(1, 2))]


# ---- classify
def test_far_halfplane_is_outside():
    reg = make_region(UNIT_SQUARE, [], ())
    assert classify(reg, parse_range("(x1 - 10 >= 0)", 2)) is Verdict.OUTSIDE


def test_whole_space_is_inside():
    reg = make_region(UNIT_SQUARE, [], ())
    assert classify(reg, Range.atom(MPoly.constant(1, 2))) is Verdict.INSIDE


def test_disk_through_region_crosses():
    reg = make_region(UNIT_SQUARE, [], ())
    disk = parse_range("(1/4 - x1^2 - x2^2 >= 0)", 2)
    # one witness inside, one outside, both in the region
    assert disk.contains((0, 0)) and not disk.contains((1, 1))
    assert classify(reg, disk) is Verdict.CROSSES


def test_witness_contradiction_is_detected():
    reg = make_region(UNIT_SQUARE, [], ())
    reg.witness = (F(5), F(5))  # corrupt descriptor
    with pytest.raises(AssertionError):
        classify(reg, parse_range("(2 - x1 >= 0)", 2))


# ---- refine_components
def test_disk_interior_is_one_component():
    g = P("x1^2 + x2^2 - 1")
    reg = make_region([(F(1, 4), 0), (0, F(1, 4)), (-F(1, 3), -F(1, 5)), (F(1, 10), F(1, 10))], [g], (-1,))
    assert len(refine_components(reg)) == 1


def test_two_slabs_split():
    g = P("x1^2 - 1")
    reg = make_region([(-2, 0), (-2, 1), (2, 0), (2, F(1, 2))], [g], (1,))
    parts = refine_components(reg)
    assert len(parts) == 2
    assert sorted(p.count for p in parts) == [2, 2]
    assert sum(p.count for p in parts) == reg.count
    assert {tuple(sorted(int(m) for m in p.members)) for p in parts} == {(0, 1), (2, 3)}


def test_empty_region_refines_to_nothing():
    reg = make_region([(0, 0)], [], ())
    reg.count = 0
    assert refine_components(reg) == []


# ---- count_crossed
def test_horizontal_line_crosses_all_slabs():
    slabs = [[(-1, 0), (-F(1, 2), 1)], [(F(1, 4), 0), (F(3, 4), 1)], [(F(5, 4), 0), (F(7, 4), 1)],
             [(3, 0), (4, 1)]]
    regions = [make_region(s, [], ()) for s in slabs]
    assert count_crossed(regions, P("x2 - 1/3")) == 4
    assert count_crossed(regions, parse_range("(x2 - 1/3 >= 0)", 2)) == 4


def test_disjoint_zero_set_crosses_nothing():
    regions = [make_region(UNIT_SQUARE, [], ())]
    assert count_crossed(regions, P("x2 - 7")) == 0


# ---- soundness and monotonicity on random data
@settings(max_examples=40)
@given(st.integers(0, 10_000), st.sampled_from(["halfspaces", "disks", "annuli", "ellipsoid-pairs"]),
       st.integers(1, 16))
def test_classification_soundness_and_monotonicity(seed, spec, boxes):
    pts = generate_points("clustered", 40, seed=seed).points
    reg_fine = make_region(pts, [], (), max_boxes=boxes)
    reg_coarse = make_region(pts, [], (), max_boxes=1)
    (gamma,) = generate_ranges(spec, 1, seed=seed)
    inside = [gamma.contains(p) for p in pts]
    fine, coarse = classify_many([reg_fine], gamma)[0], classify_many([reg_coarse], gamma)[0]
    for v in (fine, coarse):
        if v is Verdict.INSIDE:
            assert all(inside)
        elif v is Verdict.OUTSIDE:
            assert not any(inside)
    if coarse is not Verdict.CROSSES:
        assert fine is coarse


# ---- range text
def test_range_text_examples():
    r = parse_range("(x1^2 + x2^2 - 1 >= 0) & !(x1 >= 0) | (x2 >= 0)", 2)
    assert isinstance(r.formula, Or)
    assert isinstance(r.formula.children[0], And)
    assert isinstance(r.formula.children[0].children[1], Not)
    assert r.s == 3 and r.degree == 2
    assert parse_range(format_range(r), 2) == r


def test_range_atoms_with_parentheses():
    r = parse_range("(1/16 - (x1 - 1/2)^2 - (x2 - 1/2)^2 >= 0)", 2)
    assert r.contains((F(1, 2), F(1, 2))) and not r.contains((0, 0))


@pytest.mark.parametrize("bad", ["x1 >= 0", "(x1 >= 1)", "(x1 >= 0", "(x1 >= 0) &", "(x1 >= 0) (x2 >= 0)", ""])
def test_range_parse_errors(bad):
    with pytest.raises(ValueError):
        parse_range(bad, 2)


atoms = st.sampled_from([P("x1"), P("x2 - 1/2"), P("x1^2 + x2^2 - 1"), P("-x1*x2 + 3/7")]).map(Atom)
formulas = st.recursive(atoms, lambda ch: st.one_of(
    ch.map(Not), st.lists(ch, min_size=2, max_size=3).map(lambda c: And(tuple(c))),
    st.lists(ch, min_size=2, max_size=3).map(lambda c: Or(tuple(c)))), max_leaves=6)


@given(formulas, st.tuples(st.fractions(-2, 2, max_denominator=9), st.fractions(-2, 2, max_denominator=9)))
def test_range_round_trip_preserves_membership(f, x):
    r = Range(f, 2)
    back = parse_range(format_range(r), 2)
    assert back.contains(x) == r.contains(x)
    X = np.array([[float(v) for v in x]])
    assert bool(r.contains_many(X, [x])[0]) == r.contains(x)
