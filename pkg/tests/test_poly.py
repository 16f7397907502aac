from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from polypart.poly import LinearMap, MPoly, RInterval, eval_box, eval_poly, format_poly, parse_poly, pullback, shear

F = Fraction


def P(text, n=2):
    return parse_poly(text, n)


# ---- strategies
rationals = st.fractions(min_value=-5, max_value=5, max_denominator=7)


@st.composite
def polys(draw, nvars=2, max_deg=3, max_terms=5):
    terms = {}
    for _ in range(draw(st.integers(1, max_terms))):
        mono = tuple(draw(st.integers(0, max_deg)) for _ in range(nvars))
        terms[mono] = draw(rationals)
    return MPoly(terms, nvars)


points = st.tuples(rationals, rationals)


# ---- eval
@pytest.mark.parametrize("text,x,want", [
    ("x1^2 + x2^2 - 1", (1, 0), 0),
    ("x1^2 + x2^2 - 1", (0, 0), -1),
    ("x1*x2 - 1", (2, F(1, 2)), 0),
])
def test_eval_examples(text, x, want):
    assert eval_poly(P(text), x) == want


def test_eval_rejects_wrong_arity():
    with pytest.raises(ValueError):
        eval_poly(P("x1 + x2"), (1,))


# ---- eval_box
def test_eval_box_identity_contains_unit_interval():
    iv = eval_box(P("x1", 1), [RInterval(F(0), F(1))])
    assert iv.lo <= 0 and iv.hi >= 1


def test_eval_box_certified_positive():
    # x^2 + y^2 - 1 on [2,3]x[0,1] lies in [3, 9]
    iv = eval_box(P("x1^2 + x2^2 - 1"), [RInterval(F(2), F(3)), RInterval(F(0), F(1))])
    assert iv.lo > 0 and iv.sign() == 1
    assert iv.lo <= 3 and iv.hi >= 9


def test_eval_box_uncertain_sign():
    iv = eval_box(P("x1^2 - x1", 1), [RInterval(F(0), F(1))])
    assert iv.contains(0) and iv.sign() == 0


@given(polys(), st.tuples(rationals, rationals), st.tuples(st.fractions(0, 2, max_denominator=5), st.fractions(0, 2, max_denominator=5)),
       st.tuples(st.fractions(0, 1, max_denominator=5), st.fractions(0, 1, max_denominator=5)))
def test_eval_box_soundness(p, lo, width, frac):
    box = [RInterval(a, a + w) for a, w in zip(lo, width)]
    x = tuple(a + w * t for a, w, t in zip(lo, width, frac))
    assert eval_box(p, box).contains(eval_poly(p, x))
    assert eval_box(p, box, prepass=False).contains(eval_poly(p, x))


# ---- ring laws
@given(polys(), polys(), points)
def test_ring_laws(p, q, x):
    assert eval_poly(p + q, x) == eval_poly(p, x) + eval_poly(q, x)
    assert eval_poly(p * q, x) == eval_poly(p, x) * eval_poly(q, x)
    assert eval_poly(p - q, x) == eval_poly(p, x) - eval_poly(q, x)


@given(polys(), polys())
def test_degree_of_product(p, q):
    if p.is_zero() or q.is_zero():
        return
    assert (p * q).total_degree == p.total_degree + q.total_degree


# ---- text format
@given(polys(nvars=3))
def test_text_round_trip(p):
    assert parse_poly(format_poly(p), 3) == p


def test_parse_decimals_exactly():
    assert parse_poly("0.1*x1 + 1/3", 1) == MPoly({(1,): F(1, 10), (0,): F(1, 3)}, 1)


def test_parse_nested_input():
    assert parse_poly("(x1 - 1/2)^2 - 1/4", 1) == parse_poly("x1^2 - x1", 1)
    assert parse_poly("-(x1 + 1)*(x2 - 1)") == parse_poly("-x1*x2 + x1 - x2 + 1")


@pytest.mark.parametrize("bad", ["", "x1 +", "x0", "2**x1", "x1 ^ y"])
def test_parse_errors(bad):
    with pytest.raises((ValueError, ZeroDivisionError)):
        parse_poly(bad, 2)


def test_parse_rejects_undeclared_variable():
    with pytest.raises(ValueError):
        parse_poly("x3", 2)


# ---- shear
def test_shear_hyperbola():
    # x -> x + y in xy - 1 gives y^2 + xy - 1
    assert shear(P("x1*x2 - 1"), 1, (1,)) == P("x2^2 + x1*x2 - 1")


def test_zero_shear_is_identity():
    p = P("x1^2 + x2^2 - 1")
    assert shear(p, 1, (0,)) == p


def test_shear_linear():
    assert shear(P("x1"), 1, (3,)) == P("x1 + 3*x2")


@given(polys(nvars=3), st.tuples(st.integers(-9, 9), st.integers(-9, 9)))
def test_shear_preserves_degree(p, lam):
    if p.is_zero():
        return
    assert shear(p, 2, lam).total_degree == p.total_degree


# ---- pullback
def test_pullback_drop_last():
    assert pullback(P("x1", 1), LinearMap.drop_last(2, 1)) == P("x1")


def test_pullback_sum_map():
    assert pullback(P("x1^2 - 1", 1), LinearMap([[1, 1]])) == P("(x1 + x2)^2 - 1")


def test_pullback_constant():
    assert pullback(MPoly.constant(5, 1), LinearMap([[1, 1]])) == MPoly.constant(5, 2)


def test_pullback_needs_surjective_map():
    with pytest.raises(ValueError):
        pullback(P("x1", 1), LinearMap([[0, 0]]))


@given(polys(nvars=2), st.tuples(st.integers(-5, 5), st.integers(-5, 5), st.integers(-5, 5)), points)
def test_pullback_degree_and_values(q, cols, x3):
    M = LinearMap([[1, 0, cols[0]], [0, 1, cols[1] + cols[2]]])
    g = pullback(q, M)
    if not q.is_zero():
        assert g.total_degree == q.total_degree
    x = (x3[0], x3[1], F(cols[2], 3))
    assert eval_poly(g, x) == eval_poly(q, M.apply(x))
