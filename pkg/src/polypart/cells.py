"""Semialgebraic ranges and sound region classification.

A region is summarised by a few rational boxes covering its points.  A range
is evaluated on the boxes with certified interval bounds and three-valued
logic; only verdicts that hold on every box are trusted, everything else is
reported as ``CROSSES``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from . import _numeric
from .poly import MPoly, RInterval, eval_box, eval_poly, format_poly, parse_poly

__all__ = [
    "Verdict",
    "Atom",
    "Not",
    "And",
    "Or",
    "Range",
    "parse_range",
    "format_range",
    "BoxCover",
    "classify",
    "classify_many",
    "connected_groups",
    "refine_components",
    "count_crossed",
]


class Verdict(Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    CROSSES = "crosses"


# ------------------------------------------------------------------ formulas
@dataclass(frozen=True)
class Atom:
    poly: MPoly

    def __post_init__(self):
        if self.poly.is_zero():
            raise ValueError("atoms must be nonzero polynomials")


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


Formula = Union[Atom, Not, And, Or]


def _atoms(f: Formula, out: list) -> None:
    if isinstance(f, Atom):
        if f.poly not in out:
            out.append(f.poly)
    elif isinstance(f, Not):
        _atoms(f.child, out)
    else:
        for c in f.children:
            _atoms(c, out)


def _eval3(f: Formula, truth: dict) -> np.ndarray:
    """Kleene evaluation: arrays with 1 (true), 0 (false), -1 (unknown)."""
    if isinstance(f, Atom):
        return truth[f.poly]
    if isinstance(f, Not):
        v = _eval3(f.child, truth)
        return np.where(v < 0, -1, 1 - v)
    vals = [_eval3(c, truth) for c in f.children]
    if isinstance(f, And):
        out = vals[0].copy()
        for v in vals[1:]:
            out = np.where((out == 0) | (v == 0), 0, np.where((out == 1) & (v == 1), 1, -1))
        return out
    out = vals[0].copy()
    for v in vals[1:]:
        out = np.where((out == 1) | (v == 1), 1, np.where((out == 0) & (v == 0), 0, -1))
    return out


class Range:
    """Boolean combination of atoms ``h >= 0`` in ``nvars`` variables."""

    __slots__ = ("formula", "nvars", "_atoms")

    def __init__(self, formula: Formula, nvars: int):
        self.formula = formula
        self.nvars = nvars
        atoms: list[MPoly] = []
        _atoms(formula, atoms)
        for a in atoms:
            if a.nvars != nvars:
                raise ValueError("atom in %d variables, range in %d" % (a.nvars, nvars))
        self._atoms = tuple(atoms)

    @classmethod
    def atom(cls, h: MPoly) -> "Range":
        return cls(Atom(h), h.nvars)

    @classmethod
    def from_text(cls, text: str, nvars: int | None = None) -> "Range":
        return parse_range(text, nvars)

    @property
    def atoms(self) -> tuple[MPoly, ...]:
        return self._atoms

    @property
    def degree(self) -> int:
        return max(a.total_degree for a in self._atoms)

    @property
    def s(self) -> int:
        return len(self._atoms)

    def contains(self, x: Sequence) -> bool:
        truth = {a: np.array([1 if eval_poly(a, x) >= 0 else 0]) for a in self._atoms}
        return bool(_eval3(self.formula, truth)[0] == 1)

    def contains_many(self, X: np.ndarray, exact: Sequence[Sequence]) -> np.ndarray:
        """Exact membership for many points (filtered signs, exact fallback)."""
        truth = {a: (_numeric.signs(a, X, exact) >= 0).astype(np.int8) for a in self._atoms}
        return _eval3(self.formula, truth) == 1

    def __eq__(self, other) -> bool:
        return isinstance(other, Range) and self.nvars == other.nvars and self.formula == other.formula

    def __hash__(self) -> int:
        return hash((self.nvars, self.formula))

    def __str__(self) -> str:
        return format_range(self)

    def __repr__(self) -> str:
        return "Range(%r)" % format_range(self)


_TOKEN = re.compile(r"\s*(>=|[()&|!]|[^()&|!>=]+)")


def _atom_span(s: str, start: int) -> tuple[int, int]:
    """Matching ``)`` for the ``(`` at ``start`` and the position of a top-level ``>=``.

    The span is an atom when it holds a top-level ``>=`` and no logical operator;
    otherwise the second value is -1.
    """
    close = _close_of(s, start)
    if close < 0 or re.search(r"[&|!]", s[start:close]):
        return close, -1
    depth = 0
    for i in range(start + 1, close):
        depth += (s[i] == "(") - (s[i] == ")")
        if depth == 0 and s.startswith(">=", i):
            return close, i
    return close, -1


def _close_of(s: str, start: int) -> int:
    depth = 0
    for i in range(start, len(s)):
        depth += (s[i] == "(") - (s[i] == ")")
        if depth == 0:
            return i
    return -1


def parse_range(text: str, nvars: int | None = None) -> Range:
    """Parse ``(x1^2 + x2^2 - 1 >= 0) & !(x1 >= 0) | ...``; ``!`` binds tightest, then ``&``, then ``|``."""
    s = text.strip()
    pos = 0

    def skip():
        nonlocal pos
        while pos < len(s) and s[pos].isspace():
            pos += 1

    def parse_or():
        items = [parse_and()]
        skip()
        while pos < len(s) and s[pos] == "|":
            advance()
            items.append(parse_and())
            skip()
        return items[0] if len(items) == 1 else ("or", items)

    def parse_and():
        items = [parse_unary()]
        skip()
        while pos < len(s) and s[pos] == "&":
            advance()
            items.append(parse_unary())
            skip()
        return items[0] if len(items) == 1 else ("and", items)

    def advance():
        nonlocal pos
        pos += 1

    def parse_unary():
        nonlocal pos
        skip()
        if pos >= len(s):
            raise ValueError("unexpected end of range text")
        if s[pos] == "!":
            advance()
            return ("not", parse_unary())
        if s[pos] != "(":
            raise ValueError("expected '(' at position %d" % pos)
        close, split = _atom_span(s, pos)
        if close > 0 and split > 0:
            inner = s[pos + 1 : close]
            left, right = inner[: split - pos - 1], inner[split - pos + 1 :]
            if right.strip() != "0":
                raise ValueError("atoms must have the form (<poly> >= 0)")
            pos = close + 1
            return ("atom", left.strip())
        advance()
        node = parse_or()
        skip()
        if pos >= len(s) or s[pos] != ")":
            raise ValueError("missing ')' at position %d" % pos)
        advance()
        return ("group", node)

    tree = parse_or()
    skip()
    if pos != len(s):
        raise ValueError("trailing text at position %d" % pos)

    def max_var(node):
        kind = node[0]
        if kind == "atom":
            found = [int(v) for v in re.findall(r"x(\d+)", node[1])]
            return max(found, default=0)
        if kind in ("not", "group"):
            return max_var(node[1])
        return max(max_var(c) for c in node[1])

    n = nvars if nvars is not None else max(1, max_var(tree))

    def build(node):
        kind = node[0]
        if kind == "atom":
            return Atom(parse_poly(node[1], n))
        if kind == "not":
            return Not(build(node[1]))
        if kind == "group":
            return build(node[1])
        cls = And if kind == "and" else Or
        return cls(tuple(build(c) for c in node[1]))

    return Range(build(tree), n)


def _fmt(f: Formula, parent: str | None) -> str:
    if isinstance(f, Atom):
        return "(%s >= 0)" % format_poly(f.poly)
    if isinstance(f, Not):
        inner = _fmt(f.child, "not")
        if isinstance(f.child, (And, Or)):
            inner = "(%s)" % inner
        return "!" + inner
    op = " & " if isinstance(f, And) else " | "
    kind = "and" if isinstance(f, And) else "or"
    parts = []
    for c in f.children:
        t = _fmt(c, kind)
        if isinstance(c, (And, Or)):
            t = "(%s)" % t
        parts.append(t)
    return op.join(parts)


def format_range(r: Range) -> str:
    return _fmt(r.formula, None)


# ------------------------------------------------------------------ covers
@dataclass(frozen=True)
class BoxCover:
    """Dyadic boxes (float arrays of exactly representable bounds) covering a point set."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def from_points(cls, X: np.ndarray, max_boxes: int = 8, min_points: int = 4) -> "BoxCover":
        """Bounding boxes of a kd split of the points, rounded outward so exact points stay inside."""
        X = np.asarray(X, dtype=float)
        if X.shape[0] == 0:
            d = X.shape[1] if X.ndim == 2 else 0
            return cls(np.zeros((0, d)), np.zeros((0, d)))
        groups = [X]
        while len(groups) < max_boxes:
            # Split the group with the largest box extent.
            ext = [float((g.max(axis=0) - g.min(axis=0)).max()) if len(g) >= 2 * min_points else -1.0 for g in groups]
            i = int(np.argmax(ext))
            if ext[i] <= 0:
                break
            g = groups.pop(i)
            ax = int(np.argmax(g.max(axis=0) - g.min(axis=0)))
            order = np.argsort(g[:, ax], kind="stable")
            h = len(g) // 2
            groups.extend([g[order[:h]], g[order[h:]]])
        lo = np.nextafter(np.array([g.min(axis=0) for g in groups]), -np.inf)
        hi = np.nextafter(np.array([g.max(axis=0) for g in groups]), np.inf)
        return cls(lo, hi)

    def __len__(self) -> int:
        return self.lo.shape[0]

    def boxes(self) -> list[list[RInterval]]:
        return [[RInterval(Fraction(a), Fraction(b)) for a, b in zip(l, h)] for l, h in zip(self.lo, self.hi)]

    def to_json(self) -> dict:
        return {"lo": [[float(v).hex() for v in row] for row in self.lo],
                "hi": [[float(v).hex() for v in row] for row in self.hi]}

    @classmethod
    def from_json(cls, data: dict) -> "BoxCover":
        lo = np.array([[float.fromhex(v) for v in row] for row in data["lo"]], dtype=float)
        hi = np.array([[float.fromhex(v) for v in row] for row in data["hi"]], dtype=float)
        return cls(lo.reshape(len(data["lo"]), -1), hi.reshape(len(data["hi"]), -1))


def _atom_truth(h: MPoly, lo: np.ndarray, hi: np.ndarray, exact_fallback: bool = True) -> np.ndarray:
    """Per box: 1 if h >= 0 on the whole box, 0 if h < 0 on it, -1 otherwise."""
    if lo.shape[0] == 0:
        return np.zeros(0, dtype=np.int8)
    blo, bhi = _numeric.box_bounds(h, lo, hi)
    out = np.full(lo.shape[0], -1, dtype=np.int8)
    out[blo >= 0] = 1
    out[bhi < 0] = 0
    if exact_fallback:
        # Near-decisions that only failed because of the rounding allowance.
        width = bhi - blo
        close = np.flatnonzero((out < 0) & np.isfinite(width) & ((np.abs(blo) < 1e-9 * width) | (np.abs(bhi) < 1e-9 * width)))
        for i in close:
            box = [RInterval(Fraction(float(a)), Fraction(float(b))) for a, b in zip(lo[i], hi[i])]
            iv = eval_box(h, box, prepass=False)
            if iv.lo >= 0:
                out[i] = 1
            elif iv.hi < 0:
                out[i] = 0
    return out


def _cover_of(region) -> BoxCover:
    return region if isinstance(region, BoxCover) else region.cover


def classify_many(covers: Sequence, gamma: Range) -> list[Verdict]:
    """Classify many regions (or covers) against one range with one vectorised pass."""
    covs = [_cover_of(c) for c in covers]
    if not covs:
        return []
    sizes = [len(c) for c in covs]
    d = gamma.nvars
    lo = np.concatenate([c.lo for c in covs]) if sum(sizes) else np.zeros((0, d))
    hi = np.concatenate([c.hi for c in covs]) if sum(sizes) else np.zeros((0, d))
    truth = {a: _atom_truth(a, lo, hi) for a in gamma.atoms}
    box_v = _eval3(gamma.formula, truth) if sum(sizes) else np.zeros(0, dtype=np.int8)
    out = []
    start = 0
    for n in sizes:
        v = box_v[start : start + n]
        start += n
        if n == 0 or np.all(v == 0):
            out.append(Verdict.OUTSIDE)
        elif np.all(v == 1):
            out.append(Verdict.INSIDE)
        else:
            out.append(Verdict.CROSSES)
    return out


def classify(region, gamma: Range) -> Verdict:
    """Sound verdict for the region's points against ``gamma``.

    ``region`` is a region descriptor (with ``cover`` and optionally
    ``witness``) or a bare :class:`BoxCover`.
    """
    verdict = classify_many([region], gamma)[0]
    witness = getattr(region, "witness", None)
    if witness is not None and verdict is not Verdict.CROSSES:
        inside = gamma.contains(witness)
        if inside != (verdict is Verdict.INSIDE):
            raise AssertionError("certified verdict %s contradicted by the witness point" % verdict.value)
    return verdict


# ----------------------------------------------------------- connectivity
def _box_signs(polys: Sequence[MPoly], lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    cols = []
    for p in polys:
        blo, bhi = _numeric.box_bounds(p, lo, hi)
        s = np.zeros(lo.shape[0], dtype=np.int8)
        s[blo > 0] = 1
        s[bhi < 0] = -1
        cols.append(s)
    return np.stack(cols, axis=1) if cols else np.zeros((lo.shape[0], 0), dtype=np.int8)


def connected_groups(X: np.ndarray, polys: Sequence[MPoly], sign_id: Sequence[int],
                     budget: int = 4096, grid_depth: int = 8) -> list[np.ndarray] | None:
    """Split points of one sign cell into groups joined by certified boxes.

    Boxes of an adaptive dyadic subdivision are kept when every polynomial has
    a certified sign matching ``sign_id`` on the closed box; touching kept
    boxes are merged.  Points outside every kept box form singleton groups.
    Returns ``None`` if the box budget is exhausted.
    """
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if n == 0:
        return []
    if k > 3:
        raise ValueError("the grid backend supports at most three dimensions")
    target = np.array(sign_id, dtype=np.int8)
    lo0, hi0 = X.min(axis=0), X.max(axis=0)
    span = float((hi0 - lo0).max())
    span = span if span > 0 else 1.0
    # A dyadic root box slightly larger than the data.
    e = int(np.ceil(np.log2(span * 1.25)))
    size = 2.0**e
    base = np.floor((lo0 - 0.125 * size) / size * 4) * size / 4
    pending_lo = [base]
    pending_hi = [base + size]
    depth = [0]
    keep_lo, keep_hi = [], []
    visited = 0
    while pending_lo:
        lo = np.array(pending_lo)
        hi = np.array(pending_hi)
        dep = np.array(depth)
        visited += len(lo)
        if visited > budget:
            return None
        sg = _box_signs(polys, lo, hi)
        certified = np.all(sg != 0, axis=1)
        match = certified & np.all(sg == target[None, :], axis=1)
        keep_lo.extend(lo[match])
        keep_hi.extend(hi[match])
        split = ~certified & (dep < grid_depth)
        pending_lo, pending_hi, depth = [], [], []
        for b in np.flatnonzero(split):
            mid = (lo[b] + hi[b]) / 2
            for corner in range(1 << k):
                bits = np.array([(corner >> j) & 1 for j in range(k)], dtype=bool)
                pending_lo.append(np.where(bits, mid, lo[b]))
                pending_hi.append(np.where(bits, hi[b], mid))
                depth.append(dep[b] + 1)
    L = len(keep_lo)
    KL = np.array(keep_lo).reshape(L, k)
    KH = np.array(keep_hi).reshape(L, k)
    parent = list(range(L))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(L):
        touch = np.all((KL[i + 1 :] <= KH[i]) & (KH[i + 1 :] >= KL[i]), axis=1)
        for j in np.flatnonzero(touch):
            ra, rb = find(i), find(i + 1 + int(j))
            if ra != rb:
                parent[ra] = rb
    comp: dict[int, list[int]] = {}
    for idx in range(n):
        x = X[idx]
        inside = np.flatnonzero(np.all((KL <= x) & (KH >= x), axis=1)) if L else []
        key = find(int(inside[0])) if len(inside) else -(idx + 1)
        comp.setdefault(key, []).append(idx)
    return [np.array(v, dtype=np.int64) for _, v in sorted(comp.items(), key=lambda t: t[1][0])]


def refine_components(region, budget: int = 4096, grid_depth: int = 8) -> list:
    """Split a region into empirically connected pieces (unchanged on budget exhaustion)."""
    if region.count == 0:
        return []
    Xp = region.projected_points_float()
    groups = connected_groups(Xp, region.cut_polys, region.sign_id, budget, grid_depth)
    if groups is None or len(groups) <= 1:
        return [region]
    return [region.subset(g, component=c) for c, g in enumerate(groups)]


def count_crossed(regions: Sequence, X) -> int:
    """Number of regions that ``X`` (a range, or a polynomial's zero set) may cross."""
    if isinstance(X, Range):
        return sum(v is Verdict.CROSSES for v in classify_many(regions, X))
    h: MPoly = X
    covs = [_cover_of(r) for r in regions]
    total = 0
    for c in covs:
        if len(c) == 0:
            continue
        blo, bhi = _numeric.box_bounds(h, c.lo, c.hi)
        if np.all(blo > 0) or np.all(bhi < 0):
            continue
        total += 1
    return total
