"""Lex Gröbner bases by Buchberger's algorithm, with elimination helpers.

The order is lex with the last variable heaviest, so eliminating the top
variables keeps the basis elements that only involve ``x_1..x_k``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import gcd
from typing import Iterable, Sequence

from .poly import MPoly, lex_key

__all__ = [
    "BudgetExceeded",
    "IdealGens",
    "GBasis",
    "GroebnerBudget",
    "s_polynomial",
    "normal_form",
    "buchberger",
    "elimination_gens",
    "pure_power_leader",
    "ideal_dimension",
    "is_groebner_basis",
]

LEX_ORDER = "lex x_d > ... > x_1"


class BudgetExceeded(RuntimeError):
    """Buchberger stopped because a configured resource cap was hit."""


@dataclass(frozen=True)
class GroebnerBudget:
    max_basis: int = 200
    max_degree: int = 512
    max_reductions: int = 200_000


@dataclass(frozen=True)
class IdealGens:
    gens: tuple[MPoly, ...]
    nvars: int

    def __post_init__(self):
        gens = tuple(self.gens)
        for g in gens:
            if not isinstance(g, MPoly):
                raise TypeError("generators must be MPoly")
            if g.nvars != self.nvars:
                raise ValueError("generator in %d variables, ideal in %d" % (g.nvars, self.nvars))
            if g.is_zero():
                raise ValueError("zero generator")
            if g.total_degree < 1:
                raise ValueError("generators must have degree >= 1")
        object.__setattr__(self, "gens", gens)

    def add(self, g: MPoly) -> "IdealGens":
        return IdealGens(self.gens + (g,), self.nvars)


@dataclass(frozen=True)
class GBasis:
    """Reduced lex Gröbner basis with monic elements sorted by leading monomial."""

    basis: tuple[MPoly, ...]
    nvars: int
    order: str = field(default=LEX_ORDER)

    @property
    def is_unit(self) -> bool:
        return len(self.basis) == 1 and self.basis[0].is_constant()

    @property
    def is_zero_ideal(self) -> bool:
        return not self.basis

    def leading_monomials(self) -> list[tuple[int, ...]]:
        return [g.leading_monomial for g in self.basis]

    def __iter__(self):
        return iter(self.basis)

    def __len__(self) -> int:
        return len(self.basis)


# ----------------------------------------------------------------- helpers
def _divides(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    return all(x <= y for x, y in zip(a, b))


def _lcm(a, b):
    return tuple(max(x, y) for x, y in zip(a, b))


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _as_basis_list(G) -> list[MPoly]:
    if isinstance(G, GBasis):
        return list(G.basis)
    return [g for g in G if not g.is_zero()]


def s_polynomial(f: MPoly, g: MPoly) -> MPoly:
    """``lcm/lt(f) * f - lcm/lt(g) * g`` for the lex leading terms."""
    if f.is_zero() or g.is_zero():
        raise ValueError("S-polynomial of a zero polynomial")
    mf, mg = f.leading_monomial, g.leading_monomial
    L = _lcm(mf, mg)
    a = f.mul_term(_sub(L, mf), Fraction(1) / Fraction(f.leading_coeff))
    b = g.mul_term(_sub(L, mg), Fraction(1) / Fraction(g.leading_coeff))
    return a - b


def _reduce_dict(h: dict, basis: list[tuple[tuple, object, dict]], counter: list[int] | None, integral: bool) -> dict:
    """Full reduction of the term dict ``h`` by ``(lm, lc, terms)`` triples.

    With ``integral`` the arithmetic is fraction free (result is a scalar
    multiple of the true remainder); otherwise exact rational division.
    """
    p = dict(h)
    heap = [tuple(-e for e in lex_key(m)) for m in p]
    heapq.heapify(heap)
    rem: dict = {}
    while heap:
        key = heapq.heappop(heap)
        m = tuple(-e for e in key)[::-1]
        c = p.get(m)
        if c is None:
            continue
        while heap and heap[0] == key:
            heapq.heappop(heap)
        for lm, lc, terms in basis:
            if _divides(lm, m):
                break
        else:
            rem[m] = c
            del p[m]
            continue
        if counter is not None:
            counter[0] -= 1
            if counter[0] < 0:
                raise BudgetExceeded("reduction step budget exhausted")
        shift = _sub(m, lm)
        if integral:
            g = gcd(lc, c)
            a, b = lc // g, c // g
            if a != 1:
                for k in p:
                    p[k] *= a
                for k in rem:
                    rem[k] *= a
            factor = b
        else:
            factor = Fraction(c) / lc
        for tm, tc in terms.items():
            mm = tuple(x + y for x, y in zip(tm, shift))
            v = p.get(mm, 0) - factor * tc
            if v:
                if mm not in p:
                    heapq.heappush(heap, tuple(-e for e in lex_key(mm)))
                p[mm] = v
            else:
                p.pop(mm, None)
    if integral:
        rem.update(p)
        vals = list(rem.values())
        g = 0
        for v in vals:
            g = gcd(g, v)
            if g == 1:
                break
        if g > 1:
            rem = {k: v // g for k, v in rem.items()}
    return rem


def _primitive_int(p: MPoly) -> dict:
    q = p.primitive()
    return {m: int(c) for m, c in q.items()}


def normal_form(h: MPoly, G) -> MPoly:
    """Remainder of ``h`` under full multivariate division by ``G`` (exact)."""
    basis = _as_basis_list(G)
    for g in basis:
        if g.nvars != h.nvars:
            raise ValueError("variable count mismatch")
    if h.is_zero():
        return h
    triples = [(g.leading_monomial, g.leading_coeff, g.terms) for g in basis]
    rem = _reduce_dict(h.terms, triples, None, integral=False)
    return MPoly(rem, h.nvars)


def buchberger(I: IdealGens | Sequence[MPoly], budget: GroebnerBudget | None = None, nvars: int | None = None) -> GBasis:
    """Reduced lex Gröbner basis of the ideal generated by ``I``."""
    budget = budget or GroebnerBudget()
    if isinstance(I, IdealGens):
        gens = list(I.gens)
        nvars = I.nvars
    else:
        gens = [g for g in I if not g.is_zero()]
        if nvars is None:
            if not gens:
                raise ValueError("nvars is required for an empty generator list")
            nvars = gens[0].nvars
    if not gens:
        return GBasis((), nvars)
    if any(g.is_constant() for g in gens):
        return GBasis((MPoly.constant(1, nvars),), nvars)
    counter = [budget.max_reductions]
    basis: list[dict] = []
    lms: list[tuple] = []

    def add(terms: dict) -> bool:
        lm = max(terms, key=lex_key)
        if sum(lm) > budget.max_degree or max(sum(m) for m in terms) > budget.max_degree:
            raise BudgetExceeded("basis degree exceeds %d" % budget.max_degree)
        basis.append(terms)
        lms.append(lm)
        if len(basis) > budget.max_basis:
            raise BudgetExceeded("basis size exceeds %d" % budget.max_basis)
        return all(c == 0 for c in lm)

    def triples():
        return [(lms[i], basis[i][lms[i]], basis[i]) for i in range(len(basis))]

    for g in gens:
        r = _reduce_dict(_primitive_int(g), triples(), counter, integral=True)
        if r:
            if add(r):
                return GBasis((MPoly.constant(1, nvars),), nvars)
    pairs = [(i, j) for i, j in combinations(range(len(basis)), 2)]
    while pairs:
        # Normal selection: smallest lcm in the term order.
        best = min(range(len(pairs)), key=lambda t: lex_key(_lcm(lms[pairs[t][0]], lms[pairs[t][1]])))
        i, j = pairs.pop(best)
        mi, mj = lms[i], lms[j]
        if all(a == 0 or b == 0 for a, b in zip(mi, mj)):
            continue  # coprime leaders
        L = _lcm(mi, mj)
        ci, cj = basis[i][mi], basis[j][mj]
        g = gcd(ci, cj)
        a, b = cj // g, ci // g
        si, sj = _sub(L, mi), _sub(L, mj)
        s: dict = {}
        for m, c in basis[i].items():
            mm = tuple(x + y for x, y in zip(m, si))
            s[mm] = s.get(mm, 0) + a * c
        for m, c in basis[j].items():
            mm = tuple(x + y for x, y in zip(m, sj))
            s[mm] = s.get(mm, 0) - b * c
        s = {m: c for m, c in s.items() if c}
        if not s:
            continue
        r = _reduce_dict(s, triples(), counter, integral=True)
        if not r:
            continue
        if add(r):
            return GBasis((MPoly.constant(1, nvars),), nvars)
        n = len(basis) - 1
        pairs.extend((k, n) for k in range(n))
    return GBasis(tuple(_reduce_basis([MPoly(t, nvars) for t in basis])), nvars)


def _reduce_basis(polys: list[MPoly]) -> list[MPoly]:
    polys = [p for p in polys if not p.is_zero()]
    # Minimal basis: drop elements whose leader is divisible by another leader.
    polys.sort(key=lambda p: lex_key(p.leading_monomial))
    minimal: list[MPoly] = []
    for p in polys:
        lm = p.leading_monomial
        if any(_divides(q.leading_monomial, lm) for q in minimal):
            continue
        minimal = [q for q in minimal if not _divides(lm, q.leading_monomial)]
        minimal.append(p)
    out = []
    for i, p in enumerate(minimal):
        others = minimal[:i] + minimal[i + 1 :]
        lm, lc = p.leading_monomial, p.leading_coeff
        tail = MPoly({m: c for m, c in p.items() if m != lm}, p.nvars)
        r = normal_form(tail, others) if others else tail
        out.append((MPoly({lm: lc}, p.nvars) + r).monic())
    out.sort(key=lambda p: lex_key(p.leading_monomial))
    return out


def is_groebner_basis(G) -> bool:
    """Buchberger's criterion: every S-polynomial reduces to zero."""
    basis = _as_basis_list(G)
    for f, g in combinations(basis, 2):
        if not normal_form(s_polynomial(f, g), basis).is_zero():
            return False
    return True


def elimination_gens(G: GBasis, keep: int) -> list[MPoly]:
    """Basis elements free of the variables with index ``>= keep``, as polynomials in ``keep`` variables."""
    if not 0 <= keep <= G.nvars:
        raise ValueError("keep must lie in [0, nvars]")
    out = []
    for g in G.basis:
        if all(i < keep for i in g.variables()):
            out.append(g.truncate_vars(keep))
    return out


def pure_power_leader(G: GBasis, var: int) -> int | None:
    """Smallest ``D >= 1`` such that some basis element has leader ``x_var^D``.

    Returns ``None`` when there is none, including for the unit ideal (check
    ``G.is_unit`` to tell the cases apart).
    """
    best = None
    for g in G.basis:
        lm = g.leading_monomial
        if lm[var] > 0 and all(e == 0 for i, e in enumerate(lm) if i != var):
            if best is None or lm[var] < best:
                best = lm[var]
    return best


def ideal_dimension(G: GBasis) -> int:
    """Krull dimension of the quotient from leading-monomial supports; ``-1`` for the unit ideal."""
    if G.is_unit:
        return -1
    d = G.nvars
    supports = [frozenset(i for i, e in enumerate(g.leading_monomial) if e) for g in G.basis]
    best = 0
    for mask in range(1 << d):
        size = bin(mask).count("1")
        if size <= best:
            continue
        U = {i for i in range(d) if mask >> i & 1}
        if not any(s <= U for s in supports):
            best = size
    return best


def ideal_from_text(lines: Iterable[str], nvars: int) -> IdealGens:
    from .poly import parse_poly

    return IdealGens(tuple(parse_poly(t, nvars) for t in lines), nvars)
