"""Certified floating-point filters in front of exact rational evaluation.

Every routine here either returns a sign that is provably correct or defers
to exact arithmetic.  The error bound follows the standard model
``fl(a op b) = (a op b)(1 + e)``, ``|e| <= u``: a term of degree ``m`` in the
monomial table costs about ``2m + d + 2`` roundings, summation adds ``T``;
twice that count times ``u`` times the sum of absolute term values bounds the
error with room to spare.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from .poly import MPoly, eval_poly

_U = 2.0**-53
_SLACK = 1e-290
_CHUNK = 1 << 15


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def _prepare(p: MPoly):
    cached = p.numeric_cache()
    if cached is not None:
        return cached
    terms = list(p.items())
    d = p.nvars
    if not terms:
        data = (np.zeros((0, d), dtype=np.int64), np.zeros(0), 0, 0, 0)
        p.set_numeric_cache(data)
        return data
    E = np.array([m for m, _ in terms], dtype=np.int64).reshape(len(terms), d)
    bits = []
    for _, c in terms:
        f = Fraction(c)
        bits.append(abs(f.numerator).bit_length() - f.denominator.bit_length())
    shift = max(bits)
    # Scaling by a power of two keeps signs and avoids overflow of huge coefficients.
    scale = Fraction(1, 2**shift) if shift >= 0 else Fraction(2 ** (-shift))
    cf = np.array([float(Fraction(c) * scale) for _, c in terms])
    deg = int(E.sum(axis=1).max())
    data = (E, cf, deg, len(terms), shift)
    p.set_numeric_cache(data)
    return data


def _monomials(X: np.ndarray, E: np.ndarray, absolute: bool = False) -> np.ndarray:
    n, d = X.shape
    M = np.ones((n, E.shape[0]))
    if absolute:
        X = np.abs(X)
    for j in range(d):
        ej = E[:, j]
        top = int(ej.max()) if ej.size else 0
        if top == 0:
            continue
        table = np.empty((n, top + 1))
        table[:, 0] = 1.0
        col = X[:, j]
        for e in range(1, top + 1):
            table[:, e] = table[:, e - 1] * col
        M *= table[:, ej]
    return M


def float_values(p: MPoly, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Approximate values (scaled by a positive power of two) and error bounds."""
    E, cf, deg, T, _ = _prepare(p)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != p.nvars:
        raise ValueError("point array must have shape (n, %d)" % p.nvars)
    n = X.shape[0]
    if T == 0:
        return np.zeros(n), np.zeros(n)
    nops = 2 * deg + p.nvars + 4 + T
    vals = np.empty(n)
    errs = np.empty(n)
    acf = np.abs(cf)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        for s in range(0, n, _CHUNK):
            M = _monomials(X[s : s + _CHUNK], E)
            vals[s : s + _CHUNK] = M @ cf
            A = np.abs(M) @ acf
            errs[s : s + _CHUNK] = 2.0 * nops * _U * A + _SLACK * T
    bad = ~np.isfinite(vals) | ~np.isfinite(errs)
    errs[bad] = np.inf
    return vals, errs


def signs(p: MPoly, X: np.ndarray, exact: Sequence[Sequence] | None = None) -> np.ndarray:
    """Exact signs of ``p`` at the points.

    ``X`` holds float approximations (correctly rounded) of the exact points in
    ``exact``; points the filter cannot decide are evaluated exactly.
    """
    vals, errs = float_values(p, X)
    out = np.zeros(len(vals), dtype=np.int8)
    pos = vals > errs
    neg = vals < -errs
    out[pos] = 1
    out[neg] = -1
    unsure = np.flatnonzero(~(pos | neg))
    if unsure.size:
        if exact is None:
            raise ValueError("exact coordinates are needed to resolve uncertain signs")
        for i in unsure:
            out[i] = _sign(eval_poly(p, exact[i]))
    return out


def box_bounds(p: MPoly, lo, hi) -> tuple[np.ndarray, np.ndarray]:
    """Widened float bounds of ``p`` over each box ``[lo_i, hi_i]``.

    Returned bounds are in the original (unscaled) units and enclose the exact
    range, so a strictly positive lower bound certifies a positive sign.
    """
    E, cf, deg, T, shift = _prepare(p)
    LO = np.atleast_2d(np.asarray(lo, dtype=float))
    HI = np.atleast_2d(np.asarray(hi, dtype=float))
    nb = LO.shape[0]
    if T == 0:
        return np.zeros(nb), np.zeros(nb)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        tlo = np.ones((nb, T))
        thi = np.ones((nb, T))
        mag = np.ones((nb, T))
        for j in range(p.nvars):
            ej = E[:, j]
            a = LO[:, j : j + 1]
            b = HI[:, j : j + 1]
            pa = a**ej
            pb = b**ej
            even = (ej % 2 == 0)[None, :]
            straddle = (a < 0) & (b > 0)
            plo = np.where(even & straddle, 0.0, np.minimum(pa, pb))
            phi = np.maximum(pa, pb)
            plo = np.where(ej[None, :] == 0, 1.0, plo)
            phi = np.where(ej[None, :] == 0, 1.0, phi)
            cands = np.stack([tlo * plo, tlo * phi, thi * plo, thi * phi])
            tlo, thi = cands.min(axis=0), cands.max(axis=0)
            mag = mag * np.maximum(np.abs(a), np.abs(b)) ** ej
        c = cf[None, :]
        lo_t = np.where(c >= 0, c * tlo, c * thi)
        hi_t = np.where(c >= 0, c * thi, c * tlo)
        slo = lo_t.sum(axis=1)
        shi = hi_t.sum(axis=1)
        nops = 2 * deg + p.nvars + 4 + T
        err = 2.0 * nops * _U * (mag @ np.abs(cf)) + _SLACK * T
    slo = slo - err
    shi = shi + err
    bad = ~(np.isfinite(slo) & np.isfinite(shi))
    slo[bad] = -np.inf
    shi[bad] = np.inf
    # Undo the power-of-two coefficient scaling.
    with np.errstate(over="ignore", under="ignore"):
        return np.ldexp(slo, shift), np.ldexp(shi, shift)
