"""Point and range generators; every output is exact and fixed by its seed."""

from __future__ import annotations

from fractions import Fraction
from math import pi, tan

import numpy as np

from ..cells import And, Atom, Range
from ..partition import PointMultiset
from ..poly import MPoly

__all__ = ["POINT_SPECS", "RANGE_SPECS", "generate_points", "generate_ranges", "circle_point", "range_signature"]

POINT_SPECS = ("uniform", "on-circle", "on-line", "moment-curve", "clustered")
RANGE_SPECS = ("halfspaces", "disks", "annuli", "ellipsoid-pairs")

GRID = 2**16  # uniform coordinates are multiples of 1/GRID in [0, 1)


def circle_point(t: Fraction) -> tuple[Fraction, Fraction]:
    """Rational point of the unit circle at tangent-half-angle parameter ``t``."""
    t = Fraction(t)
    den = 1 + t * t
    return (1 - t * t) / den, 2 * t / den


def _distinct_ints(rng: np.random.Generator, n: int, lo: int, hi: int) -> list[int]:
    if hi - lo < n:
        raise ValueError("range too small for %d distinct values" % n)
    return sorted(int(v) for v in rng.choice(np.arange(lo, hi), size=n, replace=False))


def generate_points(spec: str, n: int, seed: int | None = None, d: int = 2, **params) -> PointMultiset:
    """Weighted (unit-weight) exact points.

    ``on-circle`` and ``on-line`` live in the plane; ``moment-curve`` uses
    ``(t, t^2, ..., t^d)``; ``clustered`` draws Gaussian blobs rounded to the grid.
    """
    if spec not in POINT_SPECS:
        raise ValueError("unknown point spec %r (expected one of %s)" % (spec, ", ".join(POINT_SPECS)))
    if n < 1:
        raise ValueError("need n >= 1 points")
    rng = np.random.default_rng(seed)
    if spec == "uniform":
        grid = int(params.get("grid", GRID))
        X = rng.integers(0, grid, size=(n, d))
        pts = [tuple(Fraction(int(v), grid) for v in row) for row in X]
    elif spec == "on-circle":
        # Angles uniform on the circle; t = tan(theta/2) rounded to a dyadic grid stays exact.
        denom = int(params.get("denominator", 2**12))
        seen: set = set()
        pts = []
        while len(pts) < n:
            theta = rng.uniform(-pi, pi)
            t = Fraction(round(tan(theta / 2) * denom), denom)
            if t in seen or abs(t) > 64:
                continue
            seen.add(t)
            pts.append(circle_point(t))
        pts.sort()
    elif spec == "on-line":
        pts = [(Fraction(i),) + (Fraction(0),) * (d - 1) for i in range(n)]
    elif spec == "moment-curve":
        denom = int(params.get("denominator", 2**10))
        ts = _distinct_ints(rng, n, -denom, denom + 1)
        pts = [tuple(Fraction(t, denom) ** j for j in range(1, d + 1)) for t in ts]
    else:
        k = int(params.get("clusters", 8))
        spread = float(params.get("spread", 0.03))
        centres = rng.uniform(0.1, 0.9, size=(k, d))
        which = rng.integers(0, k, size=n)
        X = centres[which] + spread * rng.standard_normal((n, d))
        Xi = np.clip(np.round(X * GRID), 0, GRID - 1).astype(np.int64)
        pts = [tuple(Fraction(int(v), GRID) for v in row) for row in Xi]
    return PointMultiset(tuple(pts))


def _dyadic(rng: np.random.Generator, lo: float, hi: float, bits: int = 10) -> Fraction:
    return Fraction(int(round(rng.uniform(lo, hi) * 2**bits)), 2**bits)


def _sq_dist(c: list[Fraction], d: int) -> MPoly:
    p = MPoly.zero(d)
    for i, ci in enumerate(c):
        t = MPoly.variable(i, d) - ci
        p = p + t * t
    return p


def _halfspace(rng, d: int) -> Range:
    while True:
        a = [int(v) for v in rng.integers(-1024, 1025, size=d)]
        if any(a):
            break
    p = [_dyadic(rng, 0, 1) for _ in range(d)]
    h = MPoly.zero(d)
    for i, ai in enumerate(a):
        h = h + (MPoly.variable(i, d) - p[i]).scale(ai)
    return Range.atom(h)


def _ball_atom(c, rho, d: int, outside: bool = False) -> Atom:
    q = _sq_dist(c, d)
    return Atom(q - rho * rho) if outside else Atom(MPoly.constant(rho * rho, d) - q)


def generate_ranges(spec: str, count: int, seed: int | None = None, d: int = 2, **params) -> list[Range]:
    """Random ranges over roughly the unit cube.

    Halfspaces ``a.(x - p) >= 0`` (D0 = 1, s = 1); disks (D0 = 2, s = 1); annuli
    and pairs of axis-parallel ellipsoids are conjunctions (D0 = 2, s = 2).
    """
    if spec not in RANGE_SPECS:
        raise ValueError("unknown range spec %r (expected one of %s)" % (spec, ", ".join(RANGE_SPECS)))
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = np.random.default_rng(seed)
    rmin = float(params.get("rmin", 0.05))
    rmax = float(params.get("rmax", 0.5))
    out = []
    for _ in range(count):
        if spec == "halfspaces":
            out.append(_halfspace(rng, d))
        elif spec == "disks":
            c = [_dyadic(rng, 0, 1) for _ in range(d)]
            out.append(Range(_ball_atom(c, _dyadic(rng, rmin, rmax), d), d))
        elif spec == "annuli":
            c = [_dyadic(rng, 0, 1) for _ in range(d)]
            r1 = _dyadic(rng, rmin / 2, rmax / 2)
            r2 = r1 + _dyadic(rng, rmin / 2, rmax / 2)
            out.append(Range(And((_ball_atom(c, r1, d, outside=True), _ball_atom(c, r2, d))), d))
        else:
            atoms = []
            for _ in range(2):
                c = [_dyadic(rng, 0.2, 0.8) for _ in range(d)]
                axes = [_dyadic(rng, 0.1, 0.6) for _ in range(d)]
                # 1 - sum ((x_i - c_i) / a_i)^2 >= 0
                h = MPoly.constant(1, d)
                for i in range(d):
                    t = MPoly.variable(i, d) - c[i]
                    h = h - (t * t).scale(1 / (axes[i] * axes[i]))
                atoms.append(Atom(h))
            out.append(Range(And(tuple(atoms)), d))
    return out


def range_signature(ranges: list[Range]) -> tuple[int, int]:
    """Largest atom degree and atom count over a batch: the (D0, s) pair."""
    if not ranges:
        return 0, 0
    return max(r.degree for r in ranges), max(r.s for r in ranges)

