"""Single-level partitioning polynomials by iterated polynomial ham-sandwich cuts.

A round takes every sign cell that still holds more than ``|Q|/r`` points and
finds one polynomial of degree ``D`` that bisects all of them at once: lifting
through the Veronese map turns this into a hyperplane bisecting ``s`` point
sets in ``R^m``, ``m = C(D+k, k) - 1``.

The hyperplane search is numerical (continuation Newton on a smoothed
median, then a max-margin LP over the labels near each median), but nothing
numerical is trusted: the coefficients are rounded to integers, points that
must lie on the cut are snapped exactly, and the side counts are verified by
exact sign evaluation before a cut is returned.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, comb, log, prod
from typing import Sequence

import numpy as np
from scipy.linalg import qr
from scipy.optimize import linprog
from scipy.special import expit

from . import _numeric
from .poly import MPoly, as_rational

__all__ = [
    "PointMultiset",
    "Cut",
    "PartitionConfig",
    "PartitionResult",
    "PartitionError",
    "HamSandwichError",
    "monomial_exponents",
    "veronese_lift",
    "schedule_degree",
    "round_schedule",
    "ham_sandwich_cut",
    "exact_small_ham_sandwich",
    "partitioning_polynomial",
]

log_ = logging.getLogger(__name__)


# From this many sets on, a round with little monomial slack gets a single attempt per degree.
LOW_SLACK_SETS = 32

class PartitionError(RuntimeError):
    pass


class HamSandwichError(RuntimeError):
    """No verified cut found; ``best`` holds the most balanced verified candidate, if any."""

    def __init__(self, msg: str, best: "_Candidate | None" = None):
        super().__init__(msg)
        self.best = best


# ----------------------------------------------------------------- points
@dataclass(frozen=True)
class PointMultiset:
    """Points with rational coordinates, rational weights and integer multiplicities.

    A weight belongs to the entry as a whole (all its copies); multiplicities
    count copies for the size bounds of partitions.
    """

    points: tuple[tuple, ...]
    weights: tuple = ()
    multiplicities: tuple[int, ...] = ()

    def __post_init__(self):
        pts = tuple(tuple(as_rational(v) for v in p) for p in self.points)
        n = len(pts)
        if pts and len({len(p) for p in pts}) != 1:
            raise ValueError("points must share one dimension")
        w = tuple(as_rational(v) for v in self.weights) if self.weights else (1,) * n
        m = tuple(int(v) for v in self.multiplicities) if self.multiplicities else (1,) * n
        if len(w) != n or len(m) != n:
            raise ValueError("weights and multiplicities must match the number of points")
        if any(v < 1 for v in m):
            raise ValueError("multiplicities must be positive")
        if any(v < 0 for v in w):
            raise ValueError("weights must be non-negative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "multiplicities", m)

    @property
    def dim(self) -> int:
        return len(self.points[0]) if self.points else 0

    @property
    def size(self) -> int:
        return sum(self.multiplicities)

    def __len__(self) -> int:
        return len(self.points)

    def float_array(self) -> np.ndarray:
        return np.array([[float(v) for v in p] for p in self.points], dtype=float).reshape(len(self.points), self.dim)

    def merged(self) -> "PointMultiset":
        """Combine repeated locations into one entry each."""
        acc: dict[tuple, list] = {}
        for p, w, m in zip(self.points, self.weights, self.multiplicities):
            if p in acc:
                acc[p][0] += w
                acc[p][1] += m
            else:
                acc[p] = [w, m]
        pts = list(acc)
        return PointMultiset(tuple(pts), tuple(acc[p][0] for p in pts), tuple(acc[p][1] for p in pts))


# ------------------------------------------------------------- veronese
def monomial_exponents(k: int, D: int) -> list[tuple[int, ...]]:
    """Non-constant monomials of degree <= D: by degree, then by decreasing x_1 exponent."""
    out: list[tuple[int, ...]] = []

    def rec(prefix: list[int], left: int):
        if len(prefix) == k - 1:
            out.append(tuple(prefix + [left]))
            return
        for e in range(left, -1, -1):
            rec(prefix + [e], left - e)

    for deg in range(1, D + 1):
        rec([], deg)
    return out


def veronese_lift(x: Sequence, D: int) -> tuple:
    """Values of all non-constant monomials of degree <= D at ``x``."""
    if D < 1:
        raise ValueError("D must be at least 1")
    xs = [as_rational(v) for v in x]
    out = []
    for mono in monomial_exponents(len(xs), D):
        v = 1
        for a, e in zip(xs, mono):
            if e:
                v = v * a**e
        out.append(v)
    return tuple(out)


def schedule_degree(s: int, k: int) -> int:
    """Smallest D whose lifted dimension C(D+k, k) - 1 is at least s."""
    D = 1
    while comb(D + k, k) - 1 < s:
        D += 1
    return D


def round_schedule(r, k: int, beta=Fraction(1, 2)) -> list[int]:
    """Degrees D_t of the ``ceil(log_{1/beta} r)`` rounds when every round is an exact bisection."""
    r = float(r)
    if r <= 1:
        return []
    j = max(1, ceil(log(r) / log(1 / float(beta)) - 1e-12))
    return [schedule_degree(2 ** (t - 1), k) for t in range(1, j + 1)]


# ------------------------------------------------------------ the solver
@dataclass
class _Candidate:
    coeffs: list  # exact integer/Fraction coefficients, one per column
    beta: Fraction  # achieved max side fraction
    signs: list  # per set: int8 array of exact signs
    exact: bool  # both sides <= 1/2 on every set
    warm: dict | None = None  # float solution by monomial, to restart at a higher degree


class _Sets:
    """Targeted sets in normalised coordinates, padded for vectorised work."""

    def __init__(self, Zf: list[np.ndarray], Zx: list[list[tuple]], mult: list[np.ndarray], exps: list[tuple]):
        self.exps = exps
        self.E = np.array(exps, dtype=np.int64).reshape(len(exps), -1)
        self.Zf = Zf
        self.Zx = Zx
        self.mult = [np.asarray(m, dtype=np.int64) for m in mult]
        self.s = len(Zf)
        self.nmax = max(len(z) for z in Zf)
        self.m1 = len(exps) + 1
        self.F = np.zeros((self.s, self.nmax, self.m1))
        self.W = np.zeros((self.s, self.nmax))
        self.mask = np.zeros((self.s, self.nmax), dtype=bool)
        for i, (z, m) in enumerate(zip(Zf, self.mult)):
            n = len(z)
            self.F[i, :n] = lift_float(z, self.E)
            # Scale-free weights so that doubling all multiplicities changes nothing.
            self.W[i, :n] = m / m.mean()
            self.mask[i, :n] = True
        self.rows = np.arange(self.s)
        self._chol = None

    def chol(self) -> np.ndarray:
        """Cholesky factor of the Gram matrix of lifted values, the metric for small corrections."""
        if self._chol is None:
            Fall = self.F[self.mask]
            G = Fall.T @ Fall / len(Fall)
            G += 1e-12 * np.trace(G) / len(G) * np.eye(len(G))
            self._chol = np.linalg.cholesky(G)
        return self._chol

    def correction(self, J: np.ndarray, r: np.ndarray) -> np.ndarray:
        """Smallest change of the cut, measured by its values on the points, with ``J d = -r``."""
        L = self.chol()
        Jt = np.linalg.solve(L, J.T).T
        y = -np.linalg.lstsq(Jt, r, rcond=None)[0]
        return np.linalg.solve(L.T, y)

    def values(self, a: np.ndarray) -> np.ndarray:
        return self.F @ a


def lift_float(Z: np.ndarray, E: np.ndarray) -> np.ndarray:
    n = Z.shape[0]
    out = np.ones((n, E.shape[0] + 1))
    if E.shape[0]:
        out[:, 1:] = _numeric._monomials(Z, E)
    return out


def _surrogate(S: _Sets, a: np.ndarray, kappa: float, sp: np.ndarray | None = None, jac: bool = True):
    V = S.values(a)
    Vp = np.where(S.mask, V, np.inf)
    order = np.argsort(Vp, axis=1, kind="stable")
    Vs = np.take_along_axis(Vp, order, axis=1)
    Ws = np.take_along_axis(S.W, order, axis=1)
    cum = np.cumsum(Ws, axis=1)
    tot = cum[:, -1]
    half = tot / 2
    nd = S.mask.sum(axis=1)
    ic = np.minimum((cum < half[:, None]).sum(axis=1), nd - 1)
    if sp is None:
        h = np.maximum(1, nd // 20)
        ilo = np.maximum(0, ic - h)
        ihi = np.minimum(nd - 1, ic + h)
        span = np.maximum(ihi - ilo, 1)
        sp = (Vs[S.rows, ihi] - Vs[S.rows, ilo]) / span
        scale = np.abs(np.where(S.mask, V, 0)).max(axis=1) + 1e-300
        sp = np.maximum(sp, 1e-13 * scale)
    mu = Vs[S.rows, ic].copy()
    tau = kappa * sp
    for _ in range(40):
        z = expit((V - mu[:, None]) / tau[:, None])
        f = (S.W * z).sum(axis=1) - half
        d = (S.W * z * (1 - z)).sum(axis=1) / tau
        step = f / np.maximum(d, 1e-300)
        mu += step
        if np.all(np.abs(step) <= 1e-9 * tau):
            break
    if not jac:
        return mu, None, sp
    z = expit((V - mu[:, None]) / tau[:, None])
    wts = S.W * z * (1 - z)
    J = np.einsum("sn,snm->sm", wts, S.F) / np.maximum(wts.sum(axis=1), 1e-300)[:, None]
    return mu, J, sp


def _continuation(S: _Sets, rng: np.random.Generator,
                  kappas=(64, 32, 16, 8, 5.6, 4, 2.8, 2, 1.4, 1, 0.7, 0.5, 0.35, 0.25, 0.125), inner: int = 30,
                  start: np.ndarray | None = None):
    # The spacing is frozen per stage; rescaling it inside a stage makes Newton stall.
    if start is None:
        a = rng.standard_normal(S.m1)
    else:
        # A warm start is already close; the coarse stages would only undo it.
        a = np.asarray(start, dtype=float)
        kappas = [kap for kap in kappas if kap <= 1]
    a /= np.linalg.norm(a)
    for kappa in kappas:
        _, _, sp = _surrogate(S, a, kappa)
        for _ in range(inner):
            mu, J, _ = _surrogate(S, a, kappa, sp)
            merit = np.linalg.norm(mu / sp)
            if merit < 1e-9:
                break
            delta = S.correction(J, mu)
            t = 1.0
            while t > 1e-3:
                b = a + t * delta
                mb, _, _ = _surrogate(S, b, kappa, sp, jac=False)
                if np.linalg.norm(mb / sp) < merit * (1 - 1e-4 * t):
                    break
                t /= 2
            if t <= 1e-3:
                break
            a = b
        a = a / np.linalg.norm(a)
    return a


def _labels(S: _Sets, a: np.ndarray):
    """Per set: (below, above, pinned) local indices realising an exact bisection of the current order."""
    out = []
    V = S.values(a)
    for i in range(S.s):
        n = len(S.Zf[i])
        v = V[i, :n]
        order = np.argsort(v, kind="stable")
        cum = np.cumsum(S.mult[i][order])
        tot = int(cum[-1])
        c = int(np.searchsorted(2 * cum, tot))  # first index with 2*cum >= tot
        if 2 * int(cum[c]) == tot:
            out.append((order[: c + 1], order[c + 1 :], None))
        else:
            out.append((order[:c], order[c + 1 :], int(order[c])))
    return out


def _median_targets(S: _Sets, V: np.ndarray):
    """Per set the value the cut should vanish at, the room around it, and the pin if one is needed.

    A set splitting evenly wants zero strictly between its two middle
    values; otherwise the median point itself has to sit on the cut.
    """
    target = np.empty(S.s)
    room = np.empty(S.s)
    pins = []
    for i in range(S.s):
        v = V[i, : len(S.Zf[i])]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        cum = np.cumsum(S.mult[i][order])
        tot = int(cum[-1])
        c = int(np.searchsorted(2 * cum, tot))
        lo = vs[c - 1] if c > 0 else -np.inf
        hi = vs[c + 1] if c + 1 < len(vs) else np.inf
        if 2 * int(cum[c]) == tot and c + 1 < len(vs):
            target[i] = (vs[c] + vs[c + 1]) / 2
            room[i] = (vs[c + 1] - vs[c]) / 2
            pins.append(None)
        else:
            target[i] = vs[c]
            room[i] = min(vs[c] - lo, hi - vs[c])
            pins.append((i, int(order[c])))
    return target, room, pins


def _median_finish(S: _Sets, a0: np.ndarray, kappa: float = 0.125, iters: int = 30, max_pins: int = 64):
    """Discrete Newton on the medians; returns ``(a, pins)`` with pins only for sets that need one."""
    a = a0 / np.linalg.norm(a0)
    _, _, sp = _surrogate(S, a, kappa)

    def settle(b):
        """The finished cut if ``b`` is close enough, else None."""
        t, room, pins = _median_targets(S, S.values(b))
        need = [p for p in pins if p is not None]
        even = np.array([p is None for p in pins])
        if len(need) > max_pins or not np.all(np.abs(t[even]) < room[even]):
            return None
        if not need:
            return b, []
        if not np.all(np.abs(t[~even]) < room[~even] / 4):
            return None
        ii = np.array([p[0] for p in need])
        jj = np.array([p[1] for p in need])
        # Only the pinned rows move; every other set keeps its margin.
        c = b + S.correction(S.F[ii, jj], S.values(b)[ii, jj])
        t2, room2, pins2 = _median_targets(S, S.values(c))
        if pins2 == pins and np.all(np.abs(t2[even]) < room2[even]):
            return c, need
        return None

    for _ in range(iters):
        done = settle(a)
        if done is not None:
            return done
        t = _median_targets(S, S.values(a))[0]
        _, J, _ = _surrogate(S, a, kappa, sp)
        d = S.correction(J, t)
        m0 = float(np.linalg.norm(t / sp))
        step = 1.0
        while True:
            b = a + step * d
            done = settle(b)
            if done is not None:
                return done
            # Short steps are still taken: the set count matters, not the norm.
            if step <= 1e-3 or np.linalg.norm(_median_targets(S, S.values(b))[0] / sp) < m0 * (1 - 1e-4 * step):
                break
            step /= 2
        a = b
    return None


def _lp_finish(S: _Sets, a0: np.ndarray, K: int = 8, iters: int = 12):
    """Max-margin correction keeping the order-derived labels; returns (a, pins) or None."""
    labs = _labels(S, a0)
    V0 = S.values(a0)
    sign = np.zeros((S.s, S.nmax))
    active = []
    pins = []
    for i, (A, B, z) in enumerate(labs):
        sign[i, A] = -1
        sign[i, B] = 1
        active.extend((i, int(j)) for j in A[-K:])
        active.extend((i, int(j)) for j in B[:K])
        if z is not None:
            pins.append((i, z))
    active = set(active)
    med = np.array([np.median(np.abs(V0[i, : len(S.Zf[i])])) for i in range(S.s)])
    rho = 10 * float(med.max()) + 1e-12
    m1 = S.m1
    for _ in range(iters):
        act = sorted(active)
        ii = np.array([p[0] for p in act], dtype=np.int64)
        jj = np.array([p[1] for p in act], dtype=np.int64)
        sg = sign[ii, jj]
        Fa = S.F[ii, jj]
        A_ub = np.hstack([-sg[:, None] * Fa, np.ones((len(act), 1))])
        b_ub = sg * V0[ii, jj]
        if pins:
            pi = np.array([p[0] for p in pins])
            pj = np.array([p[1] for p in pins])
            A_eq = np.hstack([S.F[pi, pj], np.zeros((len(pins), 1))])
            b_eq = -V0[pi, pj]
        else:
            A_eq = b_eq = None
        c = np.zeros(m1 + 1)
        c[-1] = -1
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=[(-rho, rho)] * m1 + [(None, rho)], method="highs")
        if res.status == 2:
            rho *= 4
            continue
        if res.status != 0 or res.x[-1] <= 0:
            return None
        a = a0 + res.x[:-1]
        V = S.values(a)
        bad = np.argwhere(S.mask & (sign * V <= 0) & (sign != 0))
        if len(bad) == 0:
            return a, pins
        active.update((int(i), int(j)) for i, j in bad)
    return None


def _solve_exact(rows: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    n = len(rows)
    M = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((i for i in range(col, n) if M[i][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for i in range(n):
            if i != col and M[i][col] != 0:
                f = M[i][col]
                M[i] = [x - f * y for x, y in zip(M[i], M[col])]
    return [M[i][n] for i in range(n)]


def _exactify(S: _Sets, a: np.ndarray, pins) -> list | None:
    """Round to integers; solve exactly for pivot columns so pinned points sit on the cut."""
    big = np.abs(a).max()
    if not np.isfinite(big) or big == 0:
        return None
    e = int(np.floor(np.log2(big)))
    coeffs: list = [int(round(float(np.ldexp(v, 40 - e)))) for v in a]
    if not pins:
        return coeffs
    exps = S.exps
    Rf = np.array([S.F[i, j] for i, j in pins])
    _, _, piv = qr(Rf, pivoting=True, mode="economic")
    P = [int(c) for c in piv[: len(pins)]]
    Pset = set(P)
    rows, rhs = [], []
    for i, j in pins:
        z = S.Zx[i][j]
        full = [Fraction(1)] + [_mono_value(z, mono) for mono in exps]
        rows.append([full[c] for c in P])
        rhs.append(-sum(full[c] * coeffs[c] for c in range(len(full)) if c not in Pset))
    sol = _solve_exact(rows, rhs)
    if sol is None:
        return None
    for c, v in zip(P, sol):
        coeffs[c] = v
    return coeffs


def _mono_value(z: tuple, mono: tuple) -> Fraction:
    v = Fraction(1)
    for a, e in zip(z, mono):
        if e:
            v *= a**e
    return v


def _poly_from_coeffs(coeffs: list, exps: list[tuple], k: int) -> MPoly:
    terms = {(0,) * k: coeffs[0]}
    for c, mono in zip(coeffs[1:], exps):
        terms[mono] = c
    return MPoly(terms, k)


def _verify(S: _Sets, coeffs: list, k: int) -> _Candidate:
    p = _poly_from_coeffs(coeffs, S.exps, k)
    worst = Fraction(0)
    exact = True
    all_signs = []
    for i in range(S.s):
        sg = _numeric.signs(p, S.Zf[i], S.Zx[i]) if not p.is_zero() else np.zeros(len(S.Zf[i]), dtype=np.int8)
        m = S.mult[i]
        tot = int(m.sum())
        pos = int(m[sg > 0].sum())
        neg = int(m[sg < 0].sum())
        frac = Fraction(max(pos, neg), tot)
        worst = max(worst, frac)
        if 2 * pos > tot or 2 * neg > tot:
            exact = False
        all_signs.append(sg)
    return _Candidate(coeffs, worst, all_signs, exact)


def _median_split(values: list, mult: Sequence[int]):
    """Threshold realising an exact weighted bisection of 1-D exact values.

    Returns ``(t, on_cut)``: ``t`` lies strictly between two values when an
    exact half split exists, otherwise ``t`` is the median value itself.
    """
    order = sorted(range(len(values)), key=lambda i: values[i])
    tot = sum(mult)
    groups: list[tuple] = []
    for i in order:
        if groups and groups[-1][0] == values[i]:
            groups[-1][1] += mult[i]
        else:
            groups.append([values[i], mult[i]])
    cum = 0
    for idx, (v, w) in enumerate(groups):
        if 2 * (cum + w) == tot and idx + 1 < len(groups):
            return (Fraction(v) + Fraction(groups[idx + 1][0])) / 2, False
        if 2 * (cum + w) >= tot:
            return v, True
        cum += w
    return groups[-1][0], True


def _bisect_direction(Zx: list[tuple], mult, k: int, rng: np.random.Generator) -> MPoly:
    """Exact bisection of one set by a hyperplane with a random integer normal."""
    while True:
        a = [int(v) for v in rng.integers(-(2**16), 2**16 + 1, size=k)]
        if any(a):
            break
    vals = [sum(ai * zi for ai, zi in zip(a, z) if ai) for z in Zx]
    t, _ = _median_split(vals, list(mult))
    terms = {(0,) * k: -t}
    for i, ai in enumerate(a):
        if ai:
            e = [0] * k
            e[i] = 1
            terms[tuple(e)] = ai
    return MPoly(terms, k).primitive()


def _search(S: _Sets, k: int, beta: Fraction, rng: np.random.Generator, restart_budget: int,
            max_pins: int = 64, warm: dict | None = None) -> _Candidate:
    best: _Candidate | None = None
    keys = [(0,) * k] + list(S.exps)
    for attempt in range(restart_budget):
        start = None
        if attempt == 0 and warm is not None:
            start = np.array([warm.get(m, 0.0) for m in keys])
        a = _continuation(S, rng, start=start)
        tried = []
        base = _exactify(S, a, None)
        if base is not None:
            tried.append(base)
        fin = _median_finish(S, a, max_pins=max_pins)
        if fin is None:
            fin = _lp_finish(S, a)
        if fin is not None and len(fin[1]) <= max_pins:
            ex = _exactify(S, fin[0], fin[1])
            if ex is not None:
                tried.insert(0, ex)
        for coeffs in tried:
            cand = _verify(S, coeffs, k)
            if best is None or cand.beta < best.beta:
                best = cand
                best.warm = dict(zip(keys, a.tolist()))
            if cand.beta <= beta:
                return cand
        log_.debug("ham-sandwich attempt %d failed (best beta %s)", attempt, best.beta if best else None)
    raise HamSandwichError("no cut with imbalance <= %s after %d restarts" % (beta, restart_budget), best)


def _normaliser(points: list[tuple], k: int):
    """Dyadic centre and power-of-two scale mapping the points into roughly [-1, 1]^k."""
    Xf = np.array([[float(v) for v in p] for p in points]).reshape(len(points), k)
    lo, hi = Xf.min(axis=0), Xf.max(axis=0)
    centre = [Fraction(float(v)) for v in (lo + hi) / 2]
    half = float(((hi - lo) / 2).max())
    e = int(np.ceil(np.log2(half))) if half > 0 else 0
    return centre, e


def _normalise(points: list[tuple], centre, e) -> tuple[list[tuple], np.ndarray]:
    inv = Fraction(2) ** (-e)
    Zx = [tuple((Fraction(v) - c) * inv for v, c in zip(p, centre)) for p in points]
    Zf = np.array([[float(v) for v in z] for z in Zx]).reshape(len(Zx), len(centre))
    return Zx, Zf


def _denormalise(p: MPoly, centre, e) -> MPoly:
    k = p.nvars
    inv = Fraction(2) ** (-e)
    rows = [[inv if i == j else 0 for j in range(k)] for i in range(k)]
    consts = [-c * inv for c in centre]
    return p.substitute_affine(rows, consts, k).primitive()


EXACT_ORACLE_LIMIT = 20_000  # hyperplanes the enumeration fallback may try


def ham_sandwich_cut(sets: Sequence[PointMultiset], beta=Fraction(1, 2), rng=None, restart_budget: int = 3) -> MPoly:
    """Affine functional ``h`` on ``R^m`` whose open sides each hold at most ``beta`` of every set.

    The returned polynomial has degree at most one in ``m`` variables.  Side
    counts are verified exactly (with multiplicity) before returning.
    """
    beta = Fraction(as_rational(beta)) if not isinstance(beta, float) else Fraction(beta)
    if beta < Fraction(1, 2) or beta >= 1:
        raise ValueError("beta must lie in [1/2, 1)")
    sets = [s for s in sets]
    if not sets:
        raise ValueError("need at least one set")
    m = sets[0].dim
    if any(s.dim != m for s in sets):
        raise ValueError("sets must live in the same space")
    if len(sets) > m:
        raise ValueError("at most m = %d sets can be bisected in R^%d" % (m, m))
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    try:
        return _cut_for_sets([list(s.points) for s in sets], [list(s.multiplicities) for s in sets], m, 1, beta, rng,
                             restart_budget)[0]
    except HamSandwichError:
        # No spare direction when there are m sets: fall back to enumeration if it is small.
        if len(sets) != m or prod(len(s) for s in sets) > EXACT_ORACLE_LIMIT:
            raise
        h = exact_small_ham_sandwich(sets)
        if h is None:
            raise
        return h


def _cut_for_sets(pts: list[list[tuple]], mult: list[list[int]], k: int, D: int, beta: Fraction,
                  rng: np.random.Generator, restart_budget: int, warm: dict | None = None):
    """Verified cut of degree <= D in original coordinates plus its achieved imbalance."""
    if len(pts) == 1 and D >= 1:
        p = _bisect_direction(pts[0], mult[0], k, rng)
        return p, Fraction(1, 2), True
    flat = [p for group in pts for p in group]
    centre, e = _normaliser(flat, k)
    Zx, Zf, M = [], [], []
    for group, m in zip(pts, mult):
        zx, zf = _normalise(group, centre, e)
        Zx.append(zx)
        Zf.append(zf)
        M.append(np.array(m, dtype=np.int64))
    S = _Sets(Zf, Zx, M, monomial_exponents(k, D))
    cand = _search(S, k, beta, rng, restart_budget, warm=warm)
    p = _denormalise(_poly_from_coeffs(cand.coeffs, S.exps, k), centre, e)
    return p, cand.beta, cand.exact


def exact_small_ham_sandwich(sets: Sequence[PointMultiset]) -> MPoly | None:
    """Exhaustive oracle: a hyperplane through one point of each set that bisects all of them.

    Only for ``len(sets) == m`` (the number of coordinates) and small inputs;
    returns ``None`` when no such hyperplane exists.
    """
    from itertools import product

    m = sets[0].dim
    if len(sets) != m:
        raise ValueError("the oracle needs exactly m sets in R^m")
    for choice in product(*[range(len(s)) for s in sets]):
        P = [sets[i].points[j] for i, j in enumerate(choice)]
        # Hyperplane a.x + a0 = 0 through the m points: null vector of [x, 1].
        rows = [list(map(Fraction, p)) + [Fraction(1)] for p in P]
        null = _null_vector(rows, m + 1)
        if null is None:
            continue
        h = MPoly({**{tuple(int(i == j) for j in range(m)): null[i] for i in range(m) if null[i]},
                   (0,) * m: null[m]}, m)
        if h.total_degree < 1:
            continue
        ok = True
        for s in sets:
            pos = sum(mm for p, mm in zip(s.points, s.multiplicities) if h(p) > 0)
            neg = sum(mm for p, mm in zip(s.points, s.multiplicities) if h(p) < 0)
            if 2 * pos > s.size or 2 * neg > s.size:
                ok = False
                break
        if ok:
            return h
    return None


def _null_vector(rows: list[list[Fraction]], ncols: int) -> list[Fraction] | None:
    M = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][c]
        M[r] = [v * inv for v in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
    free = [c for c in range(ncols) if c not in pivots]
    if not free:
        return None
    fc = free[0]
    v = [Fraction(0)] * ncols
    v[fc] = Fraction(1)
    for i, c in enumerate(pivots):
        v[c] = -M[i][fc]
    return v


# -------------------------------------------------------- partitioning
@dataclass(frozen=True)
class PartitionConfig:
    beta: Fraction = Fraction(1, 2)
    beta_fallback: Fraction = Fraction(11, 20)
    degree_cap: int | None = None
    restart_budget: int = 3
    max_degree_raise: int = 2
    seed: int | None = None

    def default_cap(self, r, k: int) -> int:
        if self.degree_cap is not None:
            return self.degree_cap
        sched = round_schedule(r, k, self.beta_fallback)
        return sum(sched) + self.max_degree_raise * len(sched) + 1


@dataclass(frozen=True)
class Cut:
    poly: MPoly
    round: int
    degree: int
    beta: Fraction
    exact: bool
    n_sets: int


@dataclass
class PartitionResult:
    g: MPoly
    cuts: list[Cut]
    Q: PointMultiset
    signs: np.ndarray  # (n_points, n_cuts), zero rows beyond the cut that hit the point
    on_zero: np.ndarray  # bool per point
    cell: np.ndarray  # cell index per point, -1 on the zero set
    r: Fraction
    stats: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        return sum(c.degree for c in self.cuts)

    def cell_counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for c, m in zip(self.cell.tolist(), self.Q.multiplicities):
            if c >= 0:
                out[c] = out.get(c, 0) + m
        return out

    def max_cell(self) -> int:
        counts = self.cell_counts()
        return max(counts.values()) if counts else 0

    def sign_vector(self, x: Sequence) -> tuple[int, ...]:
        from .poly import eval_poly

        return tuple((v > 0) - (v < 0) for v in (eval_poly(c.poly, x) for c in self.cuts))

    def sign_vectors(self, X: np.ndarray, exact: Sequence[Sequence]) -> np.ndarray:
        cols = [_numeric.signs(c.poly, X, exact) for c in self.cuts]
        if not cols:
            return np.zeros((len(exact), 0), dtype=np.int8)
        return np.stack(cols, axis=1)


def _round_cut(pts, mult, k, cfg: PartitionConfig, rng, D0: int):
    if k == 1:
        factors = []
        for group, m in zip(pts, mult):
            t, _ = _median_split([p[0] for p in group], m)
            factors.append(MPoly({(1,): 1, (0,): -t}, 1))
        p = MPoly.constant(1, 1)
        for f in factors:
            p = p * f
        return p.primitive(), len(factors), Fraction(1, 2), True
    beta = Fraction(cfg.beta)
    fallback = max(Fraction(cfg.beta_fallback), beta)
    best = None
    warm = None
    s = len(pts)
    # A raised degree is cheaper than the extra round an inexact cut usually forces.
    for D in range(D0, D0 + cfg.max_degree_raise + 1):
        attempts = cfg.restart_budget
        slack = comb(D + k, k) - 1 - s
        if s >= LOW_SLACK_SETS and 4 * slack < s and D < D0 + cfg.max_degree_raise:
            # Many sets and few spare monomials: exact cuts are rare, raise early.
            attempts = 1
        try:
            p, b, ex = _cut_for_sets(pts, mult, k, D, beta, rng, attempts, warm)
            return p, D, b, ex
        except HamSandwichError as err:
            cand = err.best
            if cand is not None:
                warm = cand.warm
                if cand.beta <= fallback and (best is None or cand.beta < best[0].beta):
                    best = (cand, D)
    if best is None:
        raise PartitionError("no verified cut within degree %d" % (D0 + cfg.max_degree_raise))
    # Rebuild the accepted fallback candidate in original coordinates.
    cand, D = best
    flat = [p for group in pts for p in group]
    centre, e = _normaliser(flat, k)
    poly = _denormalise(_poly_from_coeffs(cand.coeffs, monomial_exponents(k, D), k), centre, e)
    return poly, D, cand.beta, cand.exact


def partitioning_polynomial(Q: PointMultiset, r, cfg: PartitionConfig | None = None, rng=None) -> PartitionResult:
    """Product of verified cuts whose sign cells each hold at most ``|Q|/r`` points of ``Q``."""
    cfg = cfg or PartitionConfig()
    r = Fraction(r) if isinstance(r, float) else Fraction(as_rational(r))
    if r <= 1:
        raise ValueError("r must exceed 1")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    k = Q.dim if len(Q) else 1
    n_pts = len(Q)
    total = Q.size
    cap = Fraction(total) / r
    degree_cap = cfg.default_cap(r, k)
    X = Q.float_array() if n_pts else np.zeros((0, k))
    exact = Q.points
    mult = np.array(Q.multiplicities, dtype=np.int64)
    label = np.zeros(n_pts, dtype=np.int64)
    on_zero = np.zeros(n_pts, dtype=bool)
    sign_cols: list[np.ndarray] = []
    cuts: list[Cut] = []
    g = MPoly.constant(1, k)
    deg = 0
    t = 0
    while True:
        live = np.flatnonzero(~on_zero)
        if live.size == 0:
            break
        keys, inv = np.unique(label[live], return_inverse=True)
        sizes = np.bincount(inv, weights=mult[live])
        big = np.flatnonzero(sizes > float(cap) - 1e-9)
        big = [b for b in big if Fraction(int(round(sizes[b]))) > cap]
        if not big:
            break
        t += 1
        if t > 64:
            raise PartitionError("too many rounds")
        groups = [live[inv == b] for b in big]
        pts = [[exact[i] for i in grp] for grp in groups]
        mm = [mult[grp].tolist() for grp in groups]
        D0 = schedule_degree(len(groups), k)
        poly, D, b, ex = _round_cut(pts, mm, k, cfg, rng, D0)
        deg += poly.total_degree
        if deg > degree_cap:
            raise PartitionError("degree %d exceeds the cap %d" % (deg, degree_cap))
        col = np.zeros(n_pts, dtype=np.int8)
        if live.size:
            col[live] = _numeric.signs(poly, X[live], [exact[i] for i in live])
        sign_cols.append(col)
        hit = live[col[live] == 0]
        on_zero[hit] = True
        label = label * 2 + (col > 0)
        cuts.append(Cut(poly, t, poly.total_degree, b, ex, len(groups)))
        g = g * poly
        log_.debug("round %d: %d sets, degree %d, beta %s", t, len(groups), poly.total_degree, b)
    cell = np.full(n_pts, -1, dtype=np.int64)
    live = np.flatnonzero(~on_zero)
    if live.size:
        _, inv = np.unique(label[live], return_inverse=True)
        cell[live] = inv
    signs = np.stack(sign_cols, axis=1) if sign_cols else np.zeros((n_pts, 0), dtype=np.int8)
    res = PartitionResult(g=g, cuts=cuts, Q=Q, signs=signs, on_zero=on_zero, cell=cell, r=r)
    res.stats = {
        "rounds": len(cuts),
        "degree": deg,
        "degree_cap": degree_cap,
        "round_degrees": [c.degree for c in cuts],
        "round_sets": [c.n_sets for c in cuts],
        "round_betas": [str(c.beta) for c in cuts],
        "exact_rounds": sum(c.exact for c in cuts),
        "schedule_degree": sum(schedule_degree(c.n_sets, k) for c in cuts),
        "cap": str(cap),
        "max_cell": res.max_cell(),
        "on_zero": int(mult[on_zero].sum()),
    }
    return res
