"""Input checks shared by the estimators, the CLI and the experiments."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from .cells import Range, parse_range
from .partition import PointMultiset
from .poly import as_rational

__all__ = ["check_points", "check_weights", "check_r", "check_range", "check_seed", "exact_value"]


def exact_value(v):
    """Exact rational for ints, fractions, decimal strings and (finite) floats.

    Floats are converted by their exact binary value, never via decimal text.
    """
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not np.isfinite(f):
            raise ValueError("non-finite coordinate %r" % f)
        return as_rational(Fraction(f))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (int, Rational, str)):
        return as_rational(v)
    raise TypeError("cannot read %r as a rational coordinate" % (v,))


def check_points(X, weights: Sequence | None = None, dim: int | None = None) -> PointMultiset:
    """Coerce ``X`` into an exact :class:`PointMultiset`.

    Accepts an existing multiset, a 2-D numpy array or a sequence of rows.
    """
    if isinstance(X, PointMultiset):
        if weights is not None:
            X = PointMultiset(X.points, check_weights(weights, len(X)), X.multiplicities)
        P = X
    else:
        if isinstance(X, np.ndarray):
            if X.ndim != 2:
                raise ValueError("expected a 2-D array of points, got shape %s" % (X.shape,))
            rows = X.tolist() if X.dtype != object else [list(r) for r in X]
        else:
            rows = [list(r) for r in X]
        pts = tuple(tuple(exact_value(v) for v in r) for r in rows)
        if pts and len({len(p) for p in pts}) != 1:
            raise ValueError("points have inconsistent dimensions")
        if weights is None:
            P = PointMultiset(pts)
        else:
            P = PointMultiset(pts, check_weights(weights, len(pts)))
    if dim is not None and len(P) and P.dim != dim:
        raise ValueError("expected points in %d dimensions, got %d" % (dim, P.dim))
    return P


def check_weights(w: Sequence, n: int) -> tuple:
    vals = tuple(exact_value(v) for v in (w.tolist() if isinstance(w, np.ndarray) else w))
    if len(vals) != n:
        raise ValueError("got %d weights for %d points" % (len(vals), n))
    if any(v < 0 for v in vals):
        raise ValueError("weights must be non-negative")
    return vals


def check_r(r) -> Fraction:
    r = Fraction(exact_value(r))
    if r <= 1:
        raise ValueError("r must exceed 1, got %s" % r)
    return r


def check_range(gamma, nvars: int | None = None) -> Range:
    if isinstance(gamma, str):
        gamma = parse_range(gamma, nvars)
    if not isinstance(gamma, Range):
        raise TypeError("expected a Range or range text, got %r" % (gamma,))
    if nvars is not None and gamma.nvars != nvars:
        raise ValueError("range in %d variables, expected %d" % (gamma.nvars, nvars))
    return gamma


def check_seed(seed) -> int:
    if seed is None:
        raise ValueError("a seed is required for randomized work")
    if isinstance(seed, (bool, float)) or not isinstance(seed, (int, np.integer)):
        raise TypeError("seed must be an integer, got %r" % (seed,))
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return int(seed)
