"""Partition tree over multilevel partitions and exact range counting."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import gcd
from typing import Sequence

import numpy as np

from .cells import BoxCover, Range, Verdict, classify_many
from .multilevel import MultilevelConfig, MultilevelError, build_multipartition, degree_ledger_check
from .partition import PointMultiset
from .poly import MPoly, as_rational, format_poly

__all__ = [
    "TreeBuildError",
    "TreeParams",
    "RegionEntry",
    "TreeNode",
    "PartitionTree",
    "QueryStats",
    "build_tree",
    "query",
    "brute_force_count",
    "oracle_parts",
]

log = logging.getLogger(__name__)


class TreeBuildError(RuntimeError):
    pass


@dataclass(frozen=True)
class TreeParams:
    n0: int = 64
    eta: float = 0.25
    multilevel: MultilevelConfig = field(default_factory=MultilevelConfig)
    seed: int | None = None

    def __post_init__(self):
        if self.n0 < 1:
            raise ValueError("n0 must be at least 1")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")


@dataclass
class RegionEntry:
    level: int
    index: int
    sign_id: tuple[int, ...]
    count: int
    weight: Fraction
    witness: tuple
    cover: BoxCover
    child: "TreeNode"


@dataclass
class TreeNode:
    points: np.ndarray  # global indices stored here: all of them at a leaf, P* otherwise
    size: int  # total multiplicity below this node
    weight: Fraction
    regions: list[RegionEntry] = field(default_factory=list)
    levels: list[dict] = field(default_factory=list)  # per level: pi, cuts, r_i, degree
    r: Fraction | None = None
    ledger: dict | None = None  # degree ledger audit of this node's multipartition

    @property
    def is_leaf(self) -> bool:
        return not self.regions and not self.levels


@dataclass
class QueryStats:
    nodes_visited: int = 0
    regions_classified: int = 0
    regions_inside: int = 0
    regions_crossed: dict = field(default_factory=dict)
    exceptional_scanned: int = 0
    leaf_points_scanned: int = 0
    weight: Fraction = Fraction(0)

    @property
    def crossed_total(self) -> int:
        return sum(self.regions_crossed.values())

    def to_dict(self) -> dict:
        return {
            "nodes_visited": self.nodes_visited,
            "regions_classified": self.regions_classified,
            "regions_inside": self.regions_inside,
            "regions_crossed": {str(k): v for k, v in sorted(self.regions_crossed.items())},
            "exceptional_scanned": self.exceptional_scanned,
            "leaf_points_scanned": self.leaf_points_scanned,
            "weight": str(self.weight),
        }


class PartitionTree:
    """Immutable tree; ``points``/``weights``/``multiplicities`` hold the merged input."""

    def __init__(self, root: TreeNode, points: PointMultiset, params: TreeParams):
        self.root = root
        self.points = points
        self.params = params
        self.X = points.float_array()
        self._int_weights = all(type(w) is int for w in points.weights)
        self._w = (np.array(points.weights, dtype=object))

    @property
    def dim(self) -> int:
        return self.points.dim

    @property
    def total_weight(self) -> Fraction:
        return self.root.weight

    def nodes(self):
        stack = [(self.root, 0)]
        while stack:
            node, depth = stack.pop()
            yield node, depth
            stack.extend((reg.child, depth + 1) for reg in reversed(node.regions))

    def height(self) -> int:
        return max(d for _, d in self.nodes())

    def stored_points(self) -> int:
        """Total entries stored in leaves and exceptional lists (each input entry exactly once)."""
        return sum(len(n.points) for n, _ in self.nodes())

    def check_invariants(self) -> dict:
        seen = np.zeros(len(self.points), dtype=np.int64)
        ok_weights = True
        ok_sizes = True
        for node, _ in self.nodes():
            seen[node.points] += 1
            if node.regions:
                for reg in node.regions:
                    if reg.weight != reg.child.weight or reg.count != reg.child.size:
                        ok_weights = False
                    if node.r is not None and reg.count > node.size / node.r:
                        ok_sizes = False
        return {"each_point_once": bool(np.all(seen == 1)), "region_weights": ok_weights,
                "child_sizes": ok_sizes, "stored": int(seen.sum()), "n": len(self.points)}

    def ledger_ok(self) -> bool:
        return all(n.ledger["ok"] for n, _ in self.nodes() if n.ledger is not None)

    def descriptor_bytes(self) -> int:
        """Serialized size of the region descriptors (covers and cut polynomials) over all nodes."""
        total = 0
        for node, _ in self.nodes():
            total += len(json.dumps(node.levels))
            total += sum(len(json.dumps(reg.cover.to_json())) for reg in node.regions)
        return total

    def query(self, gamma: Range) -> tuple[Fraction, QueryStats]:
        return query(self, gamma)

    # ----------------------------------------------------------- json
    def to_json(self) -> dict:
        def node_json(node: TreeNode) -> dict:
            out = {"points": node.points.tolist(), "size": node.size, "weight": str(node.weight)}
            if not node.is_leaf:
                out["r"] = str(node.r)
                out["levels"] = node.levels
                out["ledger"] = node.ledger
                out["regions"] = [
                    {
                        "level": reg.level,
                        "index": reg.index,
                        "sign_id": list(reg.sign_id),
                        "count": reg.count,
                        "weight": str(reg.weight),
                        "witness": [str(v) for v in reg.witness],
                        "cover": reg.cover.to_json(),
                        "child": node_json(reg.child),
                    }
                    for reg in node.regions
                ]
            return out

        p = self.params
        return {
            "format": "polypart-tree/1",
            "dim": self.dim,
            "params": {"n0": p.n0, "eta": p.eta, "seed": p.seed, "multilevel": p.multilevel.echo()},
            "points": [[str(v) for v in q] for q in self.points.points],
            "weights": [str(w) for w in self.points.weights],
            "multiplicities": list(self.points.multiplicities),
            "root": node_json(self.root),
        }

    @classmethod
    def from_json(cls, data: dict) -> "PartitionTree":
        def node_from(d: dict) -> TreeNode:
            node = TreeNode(np.array(d["points"], dtype=np.int64), d["size"], Fraction(d["weight"]))
            if "regions" in d:
                node.r = Fraction(d["r"])
                node.levels = d["levels"]
                node.ledger = d.get("ledger")
                node.regions = [
                    RegionEntry(reg["level"], reg["index"], tuple(reg["sign_id"]), reg["count"],
                                Fraction(reg["weight"]), tuple(as_rational(v) for v in reg["witness"]),
                                BoxCover.from_json(reg["cover"]), node_from(reg["child"]))
                    for reg in d["regions"]
                ]
            return node

        pts = PointMultiset(tuple(tuple(as_rational(v) for v in q) for q in data["points"]),
                            tuple(as_rational(w) for w in data["weights"]), tuple(data["multiplicities"]))
        prm = data["params"]
        ml = prm["multilevel"]
        cfg = MultilevelConfig(c=ml["c"], beta=Fraction(ml["beta"]), beta_fallback=Fraction(ml["beta_fallback"]),
                               degree_cap=ml["degree_cap"], restart_budget=ml["restart_budget"], seed=ml["seed"])
        params = TreeParams(prm["n0"], prm["eta"], cfg, prm["seed"])
        return cls(node_from(data["root"]), pts, params)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "PartitionTree":
        return cls.from_json(json.loads(text))


def _sum_weights(weights: Sequence, idx) -> Fraction:
    total = 0
    for i in idx:
        total += weights[i]
    return Fraction(total)


def build_tree(P: PointMultiset, params: TreeParams | None = None) -> PartitionTree:
    """Recursive partition tree; duplicate locations are merged into one weighted entry."""
    params = params or TreeParams()
    Pm = P.merged() if len(P) else P
    rng = np.random.default_rng(params.seed)
    mult = np.array(Pm.multiplicities, dtype=np.int64)

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        size = int(mult[idx].sum())
        weight = _sum_weights(Pm.weights, idx)
        if size <= params.n0 or len(idx) <= 1:
            return TreeNode(idx, size, weight)
        r = Fraction(float(size) ** params.eta)
        if r <= 1:
            return TreeNode(idx, size, weight)
        sub = PointMultiset(tuple(Pm.points[i] for i in idx), tuple(Pm.weights[i] for i in idx),
                            tuple(int(mult[i]) for i in idx))
        cfg = replace(params.multilevel, seed=int(rng.integers(2**62)))
        try:
            mp = build_multipartition(sub, r, cfg)
        except MultilevelError as err:
            raise TreeBuildError("node at depth %d with %d points: %s" % (depth, size, err)) from err
        audit = degree_ledger_check(mp)
        node = TreeNode(idx[mp.exceptional], size, weight, r=r,
                        ledger={k: audit[k] for k in ("ledger", "p_star", "p_star_bound", "flags", "ok")})
        for lv in mp.levels:
            node.levels.append({
                "i": lv.i,
                "r_i": str(lv.r_i),
                "degree": lv.D_i,
                "pi": lv.pi.to_json(),
                "cuts": [format_poly(c) for c in lv.cuts],
                "regions": len(lv.regions),
            })
            for reg in lv.regions:
                child = build(idx[reg.members], depth + 1)
                node.regions.append(RegionEntry(lv.i, reg.index, reg.sign_id, reg.count, reg.weight,
                                                reg.witness, reg.cover, child))
        return node

    root = build(np.arange(len(Pm), dtype=np.int64), 0)
    return PartitionTree(root, Pm, params)


def query(T: PartitionTree, gamma: Range) -> tuple[Fraction, QueryStats]:
    """Exact total weight of the points of ``T`` inside ``gamma``."""
    if gamma.nvars != T.dim:
        raise ValueError("range in %d variables, tree in %d" % (gamma.nvars, T.dim))
    stats = QueryStats()
    weights = T.points.weights
    exact = T.points.points
    total = 0

    def scan(idx: np.ndarray):
        nonlocal total
        if idx.size == 0:
            return
        inside = gamma.contains_many(T.X[idx], [exact[i] for i in idx])
        for i in idx[inside]:
            total += weights[i]

    stack = [T.root]
    while stack:
        node = stack.pop()
        stats.nodes_visited += 1
        if node.is_leaf:
            stats.leaf_points_scanned += len(node.points)
            scan(node.points)
            continue
        stats.exceptional_scanned += len(node.points)
        scan(node.points)
        verdicts = classify_many([reg.cover for reg in node.regions], gamma)
        stats.regions_classified += len(verdicts)
        # Witnesses must agree with every certified verdict.
        certain = [j for j, v in enumerate(verdicts) if v is not Verdict.CROSSES]
        if certain:
            W = np.array([[float(c) for c in node.regions[j].witness] for j in certain])
            got = gamma.contains_many(W, [node.regions[j].witness for j in certain])
            for j, g in zip(certain, got):
                if bool(g) != (verdicts[j] is Verdict.INSIDE):
                    raise AssertionError("witness contradicts a certified verdict")
        for reg, v in zip(node.regions, verdicts):
            if v is Verdict.INSIDE:
                total += reg.weight
                stats.regions_inside += 1
            elif v is Verdict.CROSSES:
                stats.regions_crossed[reg.level] = stats.regions_crossed.get(reg.level, 0) + 1
                stack.append(reg.child)
    stats.weight = Fraction(total)
    return stats.weight, stats


# ------------------------------------------------------------- oracle
def _int_poly(h: MPoly) -> list[tuple[tuple, int]]:
    p = h.primitive()  # positive content: signs unchanged
    return [(m, int(c)) for m, c in p.items()]


def _atom_signs_exact(h: MPoly, nums: list[list[int]], dens: list[int]) -> np.ndarray:
    """Signs of h at points x_j = nums[j] / dens[j] by pure integer arithmetic."""
    terms = _int_poly(h)
    D = max(sum(m) for m, _ in terms)
    n = len(dens)
    N = np.array(nums, dtype=object).reshape(n, -1) if n else np.zeros((0, h.nvars), dtype=object)
    L = np.array(dens, dtype=object)
    # Homogenised evaluation: h(x) * L^D = sum c * N^m * L^(D-|m|).
    acc = np.zeros(n, dtype=object)
    for m, c in terms:
        t = np.full(n, c, dtype=object)
        for j, e in enumerate(m):
            if e:
                t = t * N[:, j] ** e
        rest = D - sum(m)
        if rest:
            t = t * L**rest
        acc = acc + t
    return np.array([(v > 0) - (v < 0) for v in acc], dtype=np.int8)


def _exact_parts(points: Sequence[Sequence]) -> tuple[list[list[int]], list[int]]:
    nums, dens = [], []
    for p in points:
        fr = [Fraction(as_rational(v)) for v in p]
        L = 1
        for v in fr:
            L = L * v.denominator // gcd(L, v.denominator)
        nums.append([int(v * L) for v in fr])
        dens.append(L)
    return nums, dens


def brute_force_count(P: PointMultiset | Sequence, gamma: Range, weights: Sequence | None = None,
                      _parts=None) -> Fraction:
    """Exact weight inside ``gamma`` by a linear scan in integer arithmetic."""
    if isinstance(P, PointMultiset):
        pts, wts = P.points, P.weights
    else:
        pts = [tuple(as_rational(v) for v in p) for p in P]
        wts = weights if weights is not None else [1] * len(pts)
    if not len(pts):
        return Fraction(0)
    nums, dens = _parts if _parts is not None else _exact_parts(pts)
    from .cells import _eval3

    truth = {a: (_atom_signs_exact(a, nums, dens) >= 0).astype(np.int8) for a in gamma.atoms}
    inside = _eval3(gamma.formula, truth) == 1
    total = 0
    for i in np.flatnonzero(inside):
        total += wts[i]
    return Fraction(total)


def oracle_parts(P: PointMultiset):
    """Precomputed integer coordinates for repeated oracle calls."""
    return _exact_parts(P.points)
