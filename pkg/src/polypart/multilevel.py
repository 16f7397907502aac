"""The d-level construction: exceptional set P*, subsets P_ij and regions S_ij.

Level 1 partitions the points directly.  At level i >= 2 the points still
trapped on the zero sets so far (Q_{i-1}) are projected to ``R^{d-i+1}`` by a
certified projection of the current variety, partitioned there, and the
partitioning polynomial is pulled back and added to the variety's generators.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _numeric
from .cells import BoxCover
from .groebner import BudgetExceeded, GroebnerBudget, normal_form
from .partition import PartitionConfig, PartitionError, PointMultiset, partitioning_polynomial
from .poly import LinearMap, MPoly, as_rational, format_poly, parse_poly, pullback
from .projection import ProjectionCertificate, ProjectionError, VarietyHandle, build_projection

__all__ = [
    "MultilevelError",
    "MultilevelConfig",
    "Region",
    "LevelRecord",
    "MultiPartition",
    "build_multipartition",
    "degree_ledger_check",
    "nonvanishing_check",
]

log = logging.getLogger(__name__)


class MultilevelError(RuntimeError):
    def __init__(self, level: int, msg: str):
        super().__init__("level %d: %s" % (level, msg))
        self.level = level


@dataclass(frozen=True)
class MultilevelConfig:
    c: int = 2
    beta: Fraction = Fraction(1, 2)
    beta_fallback: Fraction = Fraction(11, 20)
    degree_cap: int | None = None
    restart_budget: int = 3
    seed: int | None = None
    seed_polynomial: MPoly | None = None
    max_shear_retries: int = 5
    shear_range: int = 2**16
    groebner_budget: GroebnerBudget = field(default_factory=GroebnerBudget)
    nonvanishing_budget: int = 50_000
    cover_boxes: int = 8

    def partition_config(self) -> PartitionConfig:
        return PartitionConfig(beta=Fraction(self.beta), beta_fallback=Fraction(self.beta_fallback),
                               degree_cap=self.degree_cap, restart_budget=self.restart_budget)

    def echo(self) -> dict:
        return {
            "c": self.c,
            "beta": str(self.beta),
            "beta_fallback": str(self.beta_fallback),
            "degree_cap": self.degree_cap,
            "restart_budget": self.restart_budget,
            "seed": self.seed,
            "seed_polynomial": None if self.seed_polynomial is None else format_poly(self.seed_polynomial),
            "max_shear_retries": self.max_shear_retries,
            "shear_range": self.shear_range,
            "groebner_budget": [self.groebner_budget.max_basis, self.groebner_budget.max_degree,
                                self.groebner_budget.max_reductions],
            "nonvanishing_budget": self.nonvanishing_budget,
            "cover_boxes": self.cover_boxes,
        }


@dataclass
class Region:
    """One subset P_ij with the data defining its sign cell."""

    level: int
    index: int
    sign_id: tuple[int, ...]
    witness: tuple
    count: int
    weight: Fraction
    cover: BoxCover
    members: np.ndarray
    pi: LinearMap
    cut_polys: tuple[MPoly, ...]
    component: int | None = None
    _proj: np.ndarray | None = field(default=None, repr=False)

    def projected_points_float(self) -> np.ndarray:
        if self._proj is None:
            raise ValueError("projected coordinates were not kept for this region")
        return self._proj

    def subset(self, local: np.ndarray, component: int | None = None, points=None, mult=None, weights=None) -> "Region":
        local = np.asarray(local, dtype=np.int64)
        members = self.members[local]
        src = points if points is not None else self._points
        mlt = mult if mult is not None else self._mult
        wts = weights if weights is not None else self._weights
        cnt = int(sum(mlt[i] for i in members))
        wt = sum((wts[i] for i in members), Fraction(0))
        X = np.array([[float(v) for v in src[i]] for i in members])
        reg = Region(self.level, self.index, self.sign_id, src[members[0]], cnt, wt,
                     BoxCover.from_points(X, self.cover.lo.shape[0] or 1), members, self.pi,
                     self.cut_polys, component, None if self._proj is None else self._proj[local])
        reg._points, reg._mult, reg._weights = src, mlt, wts
        return reg

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "index": self.index,
            "sign_id": list(self.sign_id),
            "component": self.component,
            "witness": [str(v) for v in self.witness],
            "count": self.count,
            "weight": str(self.weight),
            "cover": self.cover.to_json(),
            "members": self.members.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict, pi: LinearMap, cut_polys: tuple) -> "Region":
        return cls(data["level"], data["index"], tuple(data["sign_id"]),
                   tuple(as_rational(v) for v in data["witness"]), data["count"], Fraction(data["weight"]),
                   BoxCover.from_json(data["cover"]), np.array(data["members"], dtype=np.int64), pi,
                   cut_polys, data.get("component"))


@dataclass
class LevelRecord:
    i: int
    r_i: Fraction
    g: MPoly
    g_bar: MPoly
    pi: LinearMap
    cuts: tuple[MPoly, ...]
    regions: list[Region]
    variety_before: VarietyHandle
    D_i: int
    certificate: ProjectionCertificate | None
    q_in: int
    q_out: int
    nonvanishing: str
    degree_cap: int | None
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "i": self.i,
            "r_i": str(self.r_i),
            "g": format_poly(self.g),
            "g_bar": format_poly(self.g_bar),
            "pi": self.pi.to_json(),
            "cuts": [format_poly(c) for c in self.cuts],
            "regions": [r.to_json() for r in self.regions],
            "variety_before": self.variety_before.to_json(),
            "D_i": self.D_i,
            "certificate": None if self.certificate is None else self.certificate.to_json(),
            "q_in": self.q_in,
            "q_out": self.q_out,
            "nonvanishing": self.nonvanishing,
            "degree_cap": self.degree_cap,
            "stats": self.stats,
        }

    @classmethod
    def from_json(cls, data: dict, d: int) -> "LevelRecord":
        pi = LinearMap.from_json(data["pi"])
        k = pi.shape[0]
        cuts = tuple(parse_poly(c, k) for c in data["cuts"])
        regions = [Region.from_json(r, pi, cuts) for r in data["regions"]]
        cert = data["certificate"]
        return cls(data["i"], Fraction(data["r_i"]), parse_poly(data["g"], d), parse_poly(data["g_bar"], k), pi,
                   cuts, regions, VarietyHandle.from_json(data["variety_before"]), data["D_i"],
                   None if cert is None else ProjectionCertificate.from_json(cert), data["q_in"], data["q_out"],
                   data["nonvanishing"], data["degree_cap"], data.get("stats", {}))


@dataclass
class MultiPartition:
    d: int
    r: Fraction
    points: PointMultiset
    levels: list[LevelRecord]
    exceptional: np.ndarray
    ledger: list[int]
    config: dict

    @property
    def K(self) -> int:
        return self.config["c"] ** (self.d - 1)

    @property
    def regions(self) -> list[Region]:
        return [reg for lv in self.levels for reg in lv.regions]

    @property
    def exceptional_count(self) -> int:
        m = self.points.multiplicities
        return int(sum(m[i] for i in self.exceptional))

    @property
    def exceptional_locations(self) -> int:
        return len({self.points.points[i] for i in self.exceptional})

    def locate(self, x: Sequence) -> tuple[int, int] | None:
        """(level, region index) whose sign cell holds ``x``; ``None`` for the exceptional set or a new cell."""
        from .poly import eval_poly

        x = tuple(as_rational(v) for v in x)
        for lv in self.levels:
            y = lv.pi.apply(x)
            sv = tuple((v > 0) - (v < 0) for v in (eval_poly(c, y) for c in lv.cuts))
            if 0 in sv:
                continue
            for reg in lv.regions:
                if reg.sign_id == sv:
                    return lv.i, reg.index
            return None
        return None

    def check_partition(self) -> dict:
        """Exact accounting: the regions and P* partition the input, sizes within bounds."""
        n = len(self.points)
        seen = np.zeros(n, dtype=np.int64)
        for reg in self.regions:
            seen[reg.members] += 1
        seen[self.exceptional] += 1
        mult = self.points.multiplicities
        per_level = []
        ok_sizes = True
        for lv in self.levels:
            bound = Fraction(lv.q_in) / lv.r_i
            mx = max((reg.count for reg in lv.regions), default=0)
            per_level.append({"level": lv.i, "max_region": mx, "bound": str(bound), "ok": mx <= bound})
            ok_sizes &= mx <= bound
        total = sum(reg.count for reg in self.regions) + self.exceptional_count
        return {
            "disjoint_cover": bool(np.all(seen == 1)),
            "total": total,
            "n": sum(mult),
            "sizes_ok": ok_sizes,
            "levels": per_level,
        }

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "r": str(self.r),
            "config": self.config,
            "points": [[str(v) for v in p] for p in self.points.points],
            "weights": [str(w) for w in self.points.weights],
            "multiplicities": list(self.points.multiplicities),
            "levels": [lv.to_json() for lv in self.levels],
            "exceptional": self.exceptional.tolist(),
            "exceptional_points": [[str(v) for v in self.points.points[i]] for i in self.exceptional],
            "ledger": self.ledger,
        }

    @classmethod
    def from_json(cls, data: dict) -> "MultiPartition":
        pts = PointMultiset(tuple(tuple(as_rational(v) for v in p) for p in data["points"]),
                            tuple(as_rational(w) for w in data["weights"]), tuple(data["multiplicities"]))
        d = data["d"]
        levels = [LevelRecord.from_json(lv, d) for lv in data["levels"]]
        mp = cls(d, Fraction(data["r"]), pts, levels, np.array(data["exceptional"], dtype=np.int64),
                 list(data["ledger"]), data["config"])
        for lv in levels:
            for reg in lv.regions:
                reg._points, reg._mult, reg._weights = pts.points, pts.multiplicities, pts.weights
        return mp


def nonvanishing_check(V: VarietyHandle, g: MPoly, budget: int | None = None) -> bool:
    """``True`` iff ``g`` is not in the ideal of ``V`` (normal form is nonzero)."""
    if V.gb is None:
        raise ValueError("the variety handle has no Gröbner basis")
    if budget is None:
        return not normal_form(g, V.gb).is_zero()
    from .groebner import _reduce_dict

    triples = [(b.leading_monomial, b.leading_coeff, b.terms) for b in V.gb.basis]
    return bool(_reduce_dict(g.terms, triples, [budget], integral=False))


def _level_r(r: Fraction, c: int, i: int) -> Fraction:
    return r ** (c ** (i - 1))


def _seeded_result(seed: MPoly, X: np.ndarray, pts: Sequence[tuple]):
    col = _numeric.signs(seed, X, pts)
    return seed, [seed], col[:, None], col == 0


def build_multipartition(P: PointMultiset, r, cfg: MultilevelConfig | None = None) -> MultiPartition:
    """Run the d-level construction on ``P``."""
    cfg = cfg or MultilevelConfig()
    r = Fraction(r) if isinstance(r, float) else Fraction(as_rational(r))
    if r <= 1:
        raise ValueError("r must exceed 1")
    if len(P) == 0:
        raise ValueError("empty point set")
    d = P.dim
    rng = np.random.default_rng(cfg.seed)
    pcfg = cfg.partition_config()
    mult = np.array(P.multiplicities, dtype=np.int64)
    X = P.float_array()
    Q = np.arange(len(P))
    V = VarietyHandle.ambient(d)
    levels: list[LevelRecord] = []
    ledger: list[int] = []
    delta = 1
    for i in range(1, d + 1):
        if Q.size == 0:
            break
        k = d - i + 1
        r_i = _level_r(r, cfg.c, i)
        cert = None
        if i == 1:
            pi = LinearMap.identity(d)
        else:
            try:
                V = V.with_basis(cfg.groebner_budget)
                pi, cert = build_projection(V, k, rng, cfg.max_shear_retries, cfg.groebner_budget, cfg.shear_range)
            except (ProjectionError, BudgetExceeded) as err:
                raise MultilevelError(i, "projection failed: %s" % err) from err
        # Project Q and merge coincident images into one multiset entry.
        if i == 1:
            proj = [P.points[q] for q in Q]
        else:
            proj = [pi.apply(P.points[q]) for q in Q]
        loc: dict[tuple, int] = {}
        inv = np.empty(Q.size, dtype=np.int64)
        for t, y in enumerate(proj):
            inv[t] = loc.setdefault(y, len(loc))
        upts = list(loc)
        umult = np.bincount(inv, weights=mult[Q], minlength=len(upts)).astype(np.int64)
        Qbar = PointMultiset(tuple(upts), (), tuple(int(v) for v in umult))
        Yf = Qbar.float_array()
        cap = None
        if i == 1 and cfg.seed_polynomial is not None:
            seed = cfg.seed_polynomial
            if seed.nvars != d:
                raise MultilevelError(1, "seed polynomial must have %d variables" % d)
            g_bar, cuts, signs, zero = _seeded_result(seed, Yf, upts)
            stats = {"seeded": True}
        else:
            try:
                res = partitioning_polynomial(Qbar, r_i, pcfg, rng)
            except PartitionError as err:
                raise MultilevelError(i, "partitioning failed: %s" % err) from err
            g_bar = res.g
            cuts = [c.poly for c in res.cuts]
            signs = res.signs
            zero = res.on_zero
            stats = res.stats
            cap = res.stats["degree_cap"]
        g = g_bar if i == 1 else pullback(g_bar, pi)
        D_i = g.total_degree
        # Nonvanishing on V_{i-1}: only the necessary condition NF(g) != 0.
        if i == 1:
            nonvan = "pass"
        else:
            try:
                nonvan = "pass" if nonvanishing_check(V, g, cfg.nonvanishing_budget) else "fail"
            except BudgetExceeded:
                nonvan = "skipped"
            if nonvan == "fail":
                raise MultilevelError(i, "partitioning polynomial vanishes on the variety")
        # Regions: group Q by the sign vector of its projected image.
        key_of: dict[tuple, list[int]] = {}
        for t in range(Q.size):
            u = inv[t]
            if zero[u]:
                continue
            key_of.setdefault(tuple(int(v) for v in signs[u]), []).append(t)
        regions = []
        for j, (key, local) in enumerate(sorted(key_of.items())):
            members = Q[np.array(local, dtype=np.int64)]
            cnt = int(mult[members].sum())
            wt = sum((P.weights[m] for m in members), Fraction(0))
            reg = Region(i, j, key, P.points[members[0]], cnt, wt,
                         BoxCover.from_points(X[members], cfg.cover_boxes), members, pi, tuple(cuts),
                         None, Yf[inv[np.array(local)]])
            reg._points, reg._mult, reg._weights = P.points, P.multiplicities, P.weights
            regions.append(reg)
        q_in = int(mult[Q].sum())
        Qnext = Q[zero[inv]]
        delta *= max(D_i, 1)
        ledger.append(delta)
        levels.append(LevelRecord(i, r_i, g, g_bar, pi, tuple(cuts), regions, V, D_i, cert, q_in,
                                  int(mult[Qnext].sum()), nonvan, cap, stats))
        log.debug("level %d: r_i=%s, degree %d, %d regions, %d points left", i, r_i, D_i, len(regions), Qnext.size)
        if D_i >= 1:
            V = V.add(g, D_i)
        Q = Qnext
    config = dict(cfg.echo())
    config["r"] = str(r)
    config["K"] = cfg.c ** (d - 1)
    return MultiPartition(d, r, P, levels, Q, ledger, config)


def degree_ledger_check(mp: MultiPartition) -> dict:
    """Ledger audit: Delta_i is the running product of achieved degrees and |P*| <= Delta_last."""
    levels = []
    flags = []
    running = 1
    for lv, delta in zip(mp.levels, mp.ledger):
        running *= max(lv.D_i, 1)
        within = lv.degree_cap is None or lv.D_i <= lv.degree_cap
        if not within:
            flags.append("level %d: degree %d exceeds cap %d" % (lv.i, lv.D_i, lv.degree_cap))
        if running != delta:
            flags.append("level %d: ledger %d differs from product %d" % (lv.i, delta, running))
        levels.append({"level": lv.i, "degree": lv.D_i, "cap": lv.degree_cap, "delta": delta,
                       "budgeted": lv.stats.get("schedule_degree"), "ok": within and running == delta})
    final = mp.ledger[-1] if mp.ledger else 1
    pstar = mp.exceptional_locations
    if mp.exceptional.size and pstar > final:
        flags.append("|P*| = %d exceeds Delta = %d" % (pstar, final))
    rK = mp.r ** mp.K
    return {
        "levels": levels,
        "ledger": list(mp.ledger),
        "p_star": pstar,
        "p_star_count": mp.exceptional_count,
        "p_star_bound": final,
        "r_pow_K": str(rK),
        "p_star_within_rK": pstar <= rK,
        "flags": flags,
        "ok": not flags,
    }
