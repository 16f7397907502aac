"""Exact multivariate polynomials over the rationals.

Coefficients are stored as ``int`` when integral and ``Fraction`` otherwise,
so integer polynomials run on machine-speed big integers.  Monomials are
exponent tuples; the lex order treats the *last* variable as heaviest
(``x_d > ... > x_1``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from numbers import Rational
from typing import Iterable, Mapping, Sequence

Coeff = int | Fraction
Monomial = tuple[int, ...]

__all__ = [
    "MPoly",
    "RInterval",
    "LinearMap",
    "lex_key",
    "as_rational",
    "eval_poly",
    "eval_box",
    "shear",
    "pullback",
    "parse_poly",
    "format_poly",
]


def as_rational(value) -> Coeff:
    """Convert ``value`` to an exact rational (``int`` when integral).

    Strings such as ``"3/2"`` or ``"0.125"`` are parsed exactly.  Floats are
    refused because they usually signal an accidental loss of exactness.
    """
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else value
    if isinstance(value, float):
        raise TypeError("floating point value %r is not an exact rational" % value)
    if isinstance(value, str):
        value = Fraction(value.strip())
    elif isinstance(value, Rational):
        value = Fraction(value.numerator, value.denominator)
    else:
        raise TypeError("cannot interpret %r as a rational" % (value,))
    return value.numerator if value.denominator == 1 else value


def _norm(c: Coeff) -> Coeff:
    if type(c) is Fraction and c.denominator == 1:
        return c.numerator
    return c


def lex_key(mono: Monomial) -> Monomial:
    """Sort key realising lex order with the last variable heaviest."""
    return mono[::-1]


class MPoly:
    """Immutable sparse polynomial in ``nvars`` variables with rational coefficients."""

    __slots__ = ("_terms", "nvars", "_hash", "_cache")

    def __init__(self, terms: Mapping[Monomial, object] | None = None, nvars: int | None = None):
        clean: dict[Monomial, Coeff] = {}
        if terms:
            for mono, c in terms.items():
                mono = tuple(int(e) for e in mono)
                if nvars is None:
                    nvars = len(mono)
                if len(mono) != nvars:
                    raise ValueError("monomial %r does not have %d exponents" % (mono, nvars))
                if any(e < 0 for e in mono):
                    raise ValueError("negative exponent in %r" % (mono,))
                c = as_rational(c)
                if c:
                    clean[mono] = clean.get(mono, 0) + c
            clean = {m: _norm(c) for m, c in clean.items() if c}
        if nvars is None:
            raise ValueError("nvars is required for the zero polynomial")
        if nvars < 0:
            raise ValueError("nvars must be non-negative")
        self._terms = clean
        self.nvars = nvars
        self._hash = None
        self._cache = None

    @classmethod
    def _raw(cls, terms: dict, nvars: int) -> "MPoly":
        # Trusted constructor: terms already canonical.
        p = cls.__new__(cls)
        p._terms = terms
        p.nvars = nvars
        p._hash = None
        p._cache = None
        return p

    @classmethod
    def zero(cls, nvars: int) -> "MPoly":
        return cls._raw({}, nvars)

    @classmethod
    def constant(cls, c, nvars: int) -> "MPoly":
        c = as_rational(c)
        return cls._raw({(0,) * nvars: c} if c else {}, nvars)

    @classmethod
    def variable(cls, i: int, nvars: int) -> "MPoly":
        """The coordinate polynomial ``x_{i+1}`` (``i`` is 0-based)."""
        if not 0 <= i < nvars:
            raise ValueError("variable index %d out of range for %d variables" % (i, nvars))
        e = [0] * nvars
        e[i] = 1
        return cls._raw({tuple(e): 1}, nvars)

    @classmethod
    def from_str(cls, text: str, nvars: int | None = None) -> "MPoly":
        return parse_poly(text, nvars)

    # ------------------------------------------------------------------ access
    @property
    def terms(self) -> dict[Monomial, Coeff]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return not self._terms or (len(self._terms) == 1 and not any(next(iter(self._terms))))

    def coefficient(self, mono: Monomial) -> Coeff:
        return self._terms.get(tuple(mono), 0)

    @property
    def total_degree(self) -> int:
        """Total degree; ``-1`` for the zero polynomial."""
        if not self._terms:
            return -1
        return max(sum(m) for m in self._terms)

    def degree_in(self, i: int) -> int:
        if not self._terms:
            return -1
        return max(m[i] for m in self._terms)

    def variables(self) -> set[int]:
        """Indices of variables that actually occur."""
        out = set()
        for m in self._terms:
            out.update(i for i, e in enumerate(m) if e)
        return out

    @property
    def leading_monomial(self) -> Monomial:
        if not self._terms:
            raise ValueError("zero polynomial has no leading monomial")
        return max(self._terms, key=lex_key)

    @property
    def leading_coeff(self) -> Coeff:
        return self._terms[self.leading_monomial]

    def sorted_terms(self) -> list[tuple[Monomial, Coeff]]:
        """Terms in decreasing lex order."""
        return sorted(self._terms.items(), key=lambda t: lex_key(t[0]), reverse=True)

    # -------------------------------------------------------------- arithmetic
    def _coerce(self, other) -> "MPoly":
        if isinstance(other, MPoly):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch: %d vs %d" % (self.nvars, other.nvars))
            return other
        return MPoly.constant(other, self.nvars)

    def __add__(self, other) -> "MPoly":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        if len(other._terms) > len(self._terms):
            a, b = other._terms, self._terms
        else:
            a, b = self._terms, other._terms
        out = dict(a)
        for m, c in b.items():
            v = out.get(m, 0) + c
            if v:
                out[m] = _norm(v)
            else:
                out.pop(m, None)
        return MPoly._raw(out, self.nvars)

    __radd__ = __add__

    def __neg__(self) -> "MPoly":
        return MPoly._raw({m: -c for m, c in self._terms.items()}, self.nvars)

    def __sub__(self, other) -> "MPoly":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "MPoly":
        return (-self) + other

    def scale(self, c) -> "MPoly":
        c = as_rational(c)
        if not c:
            return MPoly.zero(self.nvars)
        return MPoly._raw({m: _norm(v * c) for m, v in self._terms.items()}, self.nvars)

    def mul_term(self, mono: Monomial, c) -> "MPoly":
        """Multiply by the single term ``c * x^mono``."""
        c = as_rational(c)
        if not c:
            return MPoly.zero(self.nvars)
        return MPoly._raw(
            {tuple(a + b for a, b in zip(m, mono)): _norm(v * c) for m, v in self._terms.items()},
            self.nvars,
        )

    def __mul__(self, other) -> "MPoly":
        if not isinstance(other, MPoly):
            try:
                return self.scale(other)
            except TypeError:
                return NotImplemented
        other = self._coerce(other)
        if not self._terms or not other._terms:
            return MPoly.zero(self.nvars)
        a, b = self._terms, other._terms
        if len(a) < len(b):
            a, b = b, a
        out: dict[Monomial, Coeff] = {}
        get = out.get
        for mb, cb in b.items():
            for ma, ca in a.items():
                m = tuple(x + y for x, y in zip(ma, mb))
                out[m] = get(m, 0) + ca * cb
        return MPoly._raw({m: _norm(c) for m, c in out.items() if c}, self.nvars)

    def __rmul__(self, other) -> "MPoly":
        try:
            return self.scale(other)
        except TypeError:
            return NotImplemented

    def __truediv__(self, other) -> "MPoly":
        c = as_rational(other)
        if not c:
            raise ZeroDivisionError("division of a polynomial by zero")
        return self.scale(Fraction(1) / c)

    def __pow__(self, e: int) -> "MPoly":
        if not isinstance(e, int) or e < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = MPoly.constant(1, self.nvars)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, MPoly):
            return self.nvars == other.nvars and self._terms == other._terms
        try:
            return self == MPoly.constant(other, self.nvars)
        except TypeError:
            return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    def __repr__(self) -> str:
        return "MPoly(%r, nvars=%d)" % (format_poly(self), self.nvars)

    def __str__(self) -> str:
        return format_poly(self)

    # ------------------------------------------------------------ normalising
    def content(self) -> Fraction:
        """Positive rational ``c`` such that ``self / c`` has coprime integer coefficients."""
        if not self._terms:
            return Fraction(0)
        num = 0
        den = 1
        for c in self._terms.values():
            if type(c) is int:
                num = gcd(num, c)
            else:
                num = gcd(num, c.numerator)
                den = den * c.denominator // gcd(den, c.denominator)
        return Fraction(num, den)

    def primitive(self) -> "MPoly":
        """Integer-coefficient multiple with coprime coefficients; signs are preserved."""
        if not self._terms:
            return self
        c = self.content()
        if c == 1:
            return self
        return self.scale(1 / c)

    def monic(self) -> "MPoly":
        if not self._terms:
            return self
        lc = self.leading_coeff
        if lc == 1:
            return self
        return self.scale(Fraction(1) / lc)

    # ------------------------------------------------------- calculus/evaluate
    def derivative(self, i: int) -> "MPoly":
        out = {}
        for m, c in self._terms.items():
            if m[i]:
                e = list(m)
                e[i] -= 1
                out[tuple(e)] = c * m[i]
        return MPoly._raw(out, self.nvars)

    def __call__(self, x: Sequence) -> Coeff:
        return eval_poly(self, x)

    def extend(self, nvars: int) -> "MPoly":
        """View the polynomial in ``nvars >= self.nvars`` variables (new ones appended)."""
        if nvars < self.nvars:
            raise ValueError("cannot shrink the variable count with extend")
        pad = (0,) * (nvars - self.nvars)
        return MPoly._raw({m + pad: c for m, c in self._terms.items()}, nvars)

    def truncate_vars(self, nvars: int) -> "MPoly":
        """Drop trailing variables that do not occur."""
        for m in self._terms:
            if any(m[nvars:]):
                raise ValueError("polynomial involves a dropped variable")
        return MPoly._raw({m[:nvars]: c for m, c in self._terms.items()}, nvars)

    def substitute_affine(self, rows: Sequence[Sequence], consts: Sequence | None = None, nvars: int | None = None) -> "MPoly":
        """Return ``p(A y + b)`` where ``rows[i]`` holds the coefficients of ``x_i`` in ``y``.

        ``nvars`` is the number of new variables (defaults to ``len(rows[0])``).
        """
        if len(rows) != self.nvars:
            raise ValueError("need one affine form per variable")
        if nvars is None:
            nvars = len(rows[0]) if rows else 0
        consts = consts if consts is not None else [0] * self.nvars
        forms = []
        for row, b in zip(rows, consts):
            if len(row) != nvars:
                raise ValueError("affine form has the wrong length")
            t = {}
            for j, a in enumerate(row):
                a = as_rational(a)
                if a:
                    e = [0] * nvars
                    e[j] = 1
                    t[tuple(e)] = a
            b = as_rational(b)
            if b:
                t[(0,) * nvars] = b
            forms.append(MPoly._raw(t, nvars))
        powers: list[list[MPoly]] = [[MPoly.constant(1, nvars)] for _ in forms]

        def power(i: int, e: int) -> MPoly:
            cache = powers[i]
            while len(cache) <= e:
                cache.append(cache[-1] * forms[i])
            return cache[e]

        acc: dict[Monomial, Coeff] = {}
        for m, c in self._terms.items():
            term = None
            for i, e in enumerate(m):
                if e:
                    pe = power(i, e)
                    term = pe if term is None else term * pe
            if term is None:
                items = (((0,) * nvars, 1),)
            else:
                items = term._terms.items()
            for mm, v in items:
                acc[mm] = acc.get(mm, 0) + c * v
        return MPoly._raw({m: _norm(v) for m, v in acc.items() if v}, nvars)

    def numeric_cache(self):
        return self._cache

    def set_numeric_cache(self, value) -> None:
        self._cache = value


def eval_poly(p: MPoly, x: Sequence) -> Coeff:
    """Exact value of ``p`` at the rational point ``x``."""
    if len(x) != p.nvars:
        raise ValueError("point has dimension %d, polynomial has %d variables" % (len(x), p.nvars))
    xs = [as_rational(v) for v in x]
    # Clear denominators so the inner loop runs on integers.
    den = 1
    for v in xs:
        if type(v) is Fraction:
            den = den * v.denominator // gcd(den, v.denominator)
    if den == 1:
        total = 0
        for m, c in p.items():
            t = c
            for v, e in zip(xs, m):
                if e:
                    t = t * v**e
            total += t
        return _norm(total) if type(total) is Fraction else total
    ints = [int(v * den) for v in xs]
    deg = p.total_degree
    total = 0
    for m, c in p.items():
        t = den ** (deg - sum(m))
        for v, e in zip(ints, m):
            if e:
                t *= v**e
        total += c * t
    return _norm(Fraction(total) / den**deg) if deg > 0 else _norm(Fraction(total))


@dataclass(frozen=True)
class RInterval:
    """Closed rational interval ``[lo, hi]``."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = Fraction(self.lo), Fraction(self.hi)
        if lo > hi:
            raise ValueError("empty interval [%s, %s]" % (lo, hi))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, v) -> "RInterval":
        v = Fraction(as_rational(v))
        return cls(v, v)

    def __add__(self, other: "RInterval") -> "RInterval":
        return RInterval(self.lo + other.lo, self.hi + other.hi)

    def __mul__(self, other: "RInterval") -> "RInterval":
        ps = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return RInterval(min(ps), max(ps))

    def scale(self, c) -> "RInterval":
        c = Fraction(as_rational(c))
        a, b = self.lo * c, self.hi * c
        return RInterval(min(a, b), max(a, b))

    def pow(self, e: int) -> "RInterval":
        if e == 0:
            return RInterval(Fraction(1), Fraction(1))
        a, b = self.lo**e, self.hi**e
        if e % 2 == 0:
            if self.lo <= 0 <= self.hi:
                return RInterval(Fraction(0), max(a, b))
            return RInterval(min(a, b), max(a, b))
        return RInterval(a, b)

    def contains(self, v) -> bool:
        return self.lo <= as_rational(v) <= self.hi

    def sign(self) -> int:
        """``+1`` or ``-1`` when certified, ``0`` when the interval meets zero."""
        if self.lo > 0:
            return 1
        if self.hi < 0:
            return -1
        return 0

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo


def _exact_box(p: MPoly, box: Sequence[RInterval]) -> RInterval:
    total = RInterval(Fraction(0), Fraction(0))
    pows: dict[tuple[int, int], RInterval] = {}
    for m, c in p.items():
        t = RInterval.point(c)
        for i, e in enumerate(m):
            if e:
                key = (i, e)
                if key not in pows:
                    pows[key] = box[i].pow(e)
                t = t * pows[key]
        total = total + t
    return total


def eval_box(p: MPoly, box: Sequence[RInterval], prepass: bool = True) -> RInterval:
    """Interval enclosing ``p`` over the box.

    A vectorised floating pass runs first; when it certifies a sign its
    (widened, exactly converted) bounds are returned.  Otherwise the rational
    term-wise bound is computed.
    """
    if len(box) != p.nvars:
        raise ValueError("box dimension does not match the polynomial")
    box = [b if isinstance(b, RInterval) else RInterval(*b) for b in box]
    if not p._terms:
        return RInterval(Fraction(0), Fraction(0))
    if prepass:
        from ._numeric import box_bounds

        lo, hi = box_bounds(p, [[float(b.lo) for b in box]], [[float(b.hi) for b in box]])
        a, b = float(lo[0]), float(hi[0])
        tiny = 2.0**-1000
        if (a > tiny or b < -tiny) and abs(a) < float("inf") and abs(b) < float("inf") and min(abs(a), abs(b)) > tiny:
            return RInterval(Fraction(a), Fraction(b))
    return _exact_box(p, box)


def shear(p: MPoly, axis: int, lambdas: Sequence) -> MPoly:
    """Substitute ``x_j -> x_j + lambda_j * x_axis`` for every ``j < axis`` (0-based axis)."""
    if p.is_zero():
        raise ValueError("cannot shear the zero polynomial")
    if len(lambdas) != axis:
        raise ValueError("need exactly %d shear coefficients" % axis)
    lam = [as_rational(v) for v in lambdas]
    if not any(lam):
        return p
    rows = []
    for j in range(p.nvars):
        row = [0] * p.nvars
        row[j] = 1
        if j < axis:
            row[axis] = lam[j]
        rows.append(row)
    return p.substitute_affine(rows)


class LinearMap:
    """Rational linear map ``R^d -> R^k`` stored as a ``k x d`` matrix."""

    __slots__ = ("matrix", "kind")

    def __init__(self, matrix: Iterable[Iterable], kind: str = "projection"):
        rows = tuple(tuple(Fraction(as_rational(v)) for v in row) for row in matrix)
        if not rows or len({len(r) for r in rows}) != 1:
            raise ValueError("matrix must be a non-empty rectangle")
        if kind not in ("shear", "projection", "identity"):
            raise ValueError("unknown map kind %r" % kind)
        self.matrix = rows
        self.kind = kind

    @classmethod
    def identity(cls, d: int) -> "LinearMap":
        return cls([[int(i == j) for j in range(d)] for i in range(d)], kind="identity")

    @classmethod
    def drop_last(cls, d: int, k: int) -> "LinearMap":
        return cls([[int(i == j) for j in range(d)] for i in range(k)])

    @classmethod
    def shear_map(cls, d: int, axis: int, lambdas: Sequence) -> "LinearMap":
        """Matrix of ``x_j -> x_j + lambda_j x_axis`` (identity plus one column)."""
        m = [[int(i == j) for j in range(d)] for i in range(d)]
        for j, lam in enumerate(lambdas):
            m[j][axis] = as_rational(lam)
        return cls(m, kind="shear")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.matrix), len(self.matrix[0])

    def apply(self, x: Sequence) -> tuple[Fraction, ...]:
        if len(x) != self.shape[1]:
            raise ValueError("point has the wrong dimension")
        xs = [as_rational(v) for v in x]
        return tuple(_norm(sum(a * v for a, v in zip(row, xs) if a)) for row in self.matrix)

    def compose(self, inner: "LinearMap") -> "LinearMap":
        """``self o inner``."""
        if self.shape[1] != inner.shape[0]:
            raise ValueError("incompatible shapes for composition")
        cols = list(zip(*inner.matrix))
        m = [[sum(a * b for a, b in zip(row, col)) for col in cols] for row in self.matrix]
        return LinearMap(m, kind="projection")

    def rank(self) -> int:
        rows = [list(r) for r in self.matrix]
        rank = 0
        ncols = len(rows[0])
        for col in range(ncols):
            piv = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
            if piv is None:
                continue
            rows[rank], rows[piv] = rows[piv], rows[rank]
            for i in range(len(rows)):
                if i != rank and rows[i][col] != 0:
                    f = rows[i][col] / rows[rank][col]
                    rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
            rank += 1
        return rank

    def is_surjective(self) -> bool:
        return self.rank() == self.shape[0]

    def to_json(self) -> dict:
        return {"kind": self.kind, "matrix": [[str(v) for v in row] for row in self.matrix]}

    @classmethod
    def from_json(cls, data: Mapping) -> "LinearMap":
        return cls([[Fraction(v) for v in row] for row in data["matrix"]], kind=data["kind"])

    def __eq__(self, other) -> bool:
        return isinstance(other, LinearMap) and self.matrix == other.matrix

    def __hash__(self) -> int:
        return hash(self.matrix)

    def __repr__(self) -> str:
        return "LinearMap(%s, kind=%r)" % ([[str(v) for v in r] for r in self.matrix], self.kind)


def pullback(q: MPoly, pi: LinearMap) -> MPoly:
    """``g(x) = q(pi(x))``; ``pi`` must be surjective."""
    k, d = pi.shape
    if q.nvars != k:
        raise ValueError("polynomial has %d variables, map has %d outputs" % (q.nvars, k))
    if not pi.is_surjective():
        raise ValueError("pullback requires a surjective linear map")
    return q.substitute_affine(pi.matrix, nvars=d)


# ---------------------------------------------------------------- text format
_TERM_RE = re.compile(r"\s*([+-])?\s*([^+-]+)")
_NUM_RE = re.compile(r"^\d+(?:/\d+|\.\d*)?$|^\.\d+$")
_VAR_RE = re.compile(r"^x(\d+)(?:\^(\d+))?$")


def parse_poly(text: str, nvars: int | None = None) -> MPoly:
    """Parse text like ``3/2*x1^2*x2 - 1``.  Variables are ``x1..xd``."""
    s = text.strip()
    if not s:
        raise ValueError("empty polynomial text")
    if "(" in s or ")" in s:
        return _parse_nested(s, nvars)
    # Split on top-level +/- while keeping exponents and fractions intact.
    pieces = []
    pos = 0
    sign_re = re.compile(r"\s*([+-])\s*")
    first = True
    while pos < len(s):
        m = sign_re.match(s, pos)
        sign = 1
        if m:
            sign = -1 if m.group(1) == "-" else 1
            pos = m.end()
        elif not first:
            raise ValueError("expected '+' or '-' at position %d in %r" % (pos, text))
        nxt = pos
        while nxt < len(s) and s[nxt] not in "+-":
            nxt += 1
        body = s[pos:nxt].strip()
        if not body:
            raise ValueError("dangling sign in %r" % text)
        pieces.append((sign, body))
        pos = nxt
        first = False
    parsed = []
    top = 0
    for sign, body in pieces:
        coeff: Coeff = sign
        exps: dict[int, int] = {}
        for factor in body.split("*"):
            factor = factor.strip()
            if not factor:
                raise ValueError("empty factor in %r" % body)
            if _NUM_RE.match(factor):
                coeff = coeff * as_rational(factor)
                continue
            vm = _VAR_RE.match(factor)
            if not vm:
                raise ValueError("cannot parse factor %r" % factor)
            idx = int(vm.group(1))
            if idx < 1:
                raise ValueError("variables are numbered from x1")
            e = int(vm.group(2)) if vm.group(2) is not None else 1
            exps[idx - 1] = exps.get(idx - 1, 0) + e
            top = max(top, idx)
        parsed.append((_norm(Fraction(coeff)), exps))
    if nvars is None:
        nvars = top
    elif top > nvars:
        raise ValueError("text uses x%d but only %d variables were declared" % (top, nvars))
    terms: dict[Monomial, Coeff] = {}
    for c, exps in parsed:
        mono = tuple(exps.get(i, 0) for i in range(nvars))
        terms[mono] = terms.get(mono, 0) + c
    return MPoly(terms, nvars)


_TOKEN_RE = re.compile(r"\s*(?:(\d+(?:\.\d*)?|\.\d+)|x(\d+)|([-+*^()/]))")


def _parse_nested(s: str, nvars: int | None) -> MPoly:
    """Input-only grammar with parentheses, e.g. ``(x1 - 1/2)^2 + 3*(x2 + 1)``."""
    toks = []
    pos = 0
    while pos < len(s):
        m = _TOKEN_RE.match(s, pos)
        if not m or m.end() == pos:
            if s[pos:].strip() == "":
                break
            raise ValueError("unexpected character %r at position %d in %r" % (s[pos], pos, s))
        num, var, op = m.groups()
        toks.append(("num", num) if num else ("var", int(var)) if var else ("op", op))
        pos = m.end()
    top = max((v for k, v in toks if k == "var"), default=0)
    if any(k == "var" and v < 1 for k, v in toks):
        raise ValueError("variables are numbered from x1")
    if nvars is None:
        nvars = top
    elif top > nvars:
        raise ValueError("text uses x%d but only %d variables were declared" % (top, nvars))
    i = 0

    def peek():
        return toks[i] if i < len(toks) else (None, None)

    def take(op=None):
        nonlocal i
        tok = peek()
        if op is not None and tok != ("op", op):
            raise ValueError("expected %r in %r" % (op, s))
        i += 1
        return tok

    def expr() -> MPoly:
        sign = 1
        if peek() in (("op", "+"), ("op", "-")):
            sign = -1 if take()[1] == "-" else 1
        acc = term().scale(sign)
        while peek() in (("op", "+"), ("op", "-")):
            op = take()[1]
            t = term()
            acc = acc + t if op == "+" else acc - t
        return acc

    def term() -> MPoly:
        acc = power()
        while peek() in (("op", "*"), ("op", "/")):
            if take()[1] == "/":
                k, v = take()
                if k != "num":
                    raise ValueError("only division by a number is supported in %r" % s)
                d = as_rational(v)
                if d == 0:
                    raise ZeroDivisionError("division by zero in %r" % s)
                acc = acc.scale(Fraction(1) / d)
            else:
                acc = acc * power()
        return acc

    def power() -> MPoly:
        base = atom()
        if peek() == ("op", "^"):
            take()
            k, v = take()
            if k != "num" or not v.isdigit():
                raise ValueError("exponents must be non-negative integers in %r" % s)
            out = MPoly.constant(1, nvars)
            for _ in range(int(v)):
                out = out * base
            return out
        return base

    def atom() -> MPoly:
        k, v = take()
        if k == "num":
            return MPoly.constant(as_rational(v), nvars)
        if k == "var":
            return MPoly.variable(v - 1, nvars)
        if (k, v) == ("op", "("):
            e = expr()
            take(")")
            return e
        raise ValueError("unexpected %r in %r" % (v, s))

    out = expr()
    if i != len(toks):
        raise ValueError("trailing text in %r" % s)
    return out


def _format_coeff(c: Coeff) -> str:
    return str(c)


def format_poly(p: MPoly) -> str:
    """Canonical text form; ``parse_poly(format_poly(p), p.nvars) == p``."""
    if p.is_zero():
        return "0"
    out = []
    for k, (m, c) in enumerate(p.sorted_terms()):
        neg = c < 0
        a = -c if neg else c
        factors = ["x%d" % (i + 1) if e == 1 else "x%d^%d" % (i + 1, e) for i, e in enumerate(m) if e]
        if a != 1 or not factors:
            factors.insert(0, _format_coeff(a))
        body = "*".join(factors)
        if k == 0:
            out.append("-" + body if neg else body)
        else:
            out.append(("- " if neg else "+ ") + body)
    return " ".join(out)
