"""scikit-learn style wrappers around partitions and the partition tree.

Inputs go through :mod:`polypart.validation`, so float arrays are read by
their exact binary values and decimal strings are read exactly.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .multilevel import MultilevelConfig, build_multipartition, degree_ledger_check
from .partition import PartitionConfig, partitioning_polynomial
from .poly import eval_poly, format_poly, parse_poly
from .rangesearch import TreeParams, build_tree
from .validation import check_points, check_r, check_range, check_seed

__all__ = ["PolynomialPartitioner", "MultilevelPartitioner", "RangeCounter"]

UNSEEN = -2  # label for a point in a sign cell that held no fitted point


def _require(est, attr: str):
    if not hasattr(est, attr):
        raise NotFittedError("%s is not fitted yet; call fit first" % type(est).__name__)


def _sign(v) -> int:
    return (v > 0) - (v < 0)


class PolynomialPartitioner(BaseEstimator):
    """One partitioning polynomial: every open sign cell holds at most n/r of the fitted points.

    ``predict`` gives the cell label (``-1`` on the zero set, ``-2`` for a
    cell no fitted point fell in); ``transform`` gives the sign of every cut.
    """

    def __init__(self, r=16, beta=Fraction(1, 2), beta_fallback=Fraction(11, 20), degree_cap=None,
                 restart_budget=3, seed=0):
        self.r = r
        self.beta = beta
        self.beta_fallback = beta_fallback
        self.degree_cap = degree_cap
        self.restart_budget = restart_budget
        self.seed = seed

    def fit(self, X, y=None, sample_weight=None):
        P = check_points(X, sample_weight)
        cfg = PartitionConfig(beta=Fraction(self.beta), beta_fallback=Fraction(self.beta_fallback),
                              degree_cap=self.degree_cap, restart_budget=self.restart_budget,
                              seed=check_seed(self.seed))
        res = partitioning_polynomial(P, check_r(self.r), cfg)
        self.result_ = res
        self.g_ = res.g
        self.cuts_ = [c.poly for c in res.cuts]
        self.degree_ = res.degree
        self.n_features_in_ = P.dim
        keys = sorted({tuple(int(v) for v in row) for row, z in zip(res.signs, res.on_zero) if not z})
        self.cells_ = {k: i for i, k in enumerate(keys)}
        return self

    def transform(self, X) -> np.ndarray:
        _require(self, "cuts_")
        P = check_points(X, dim=self.n_features_in_)
        out = np.zeros((len(P.points), len(self.cuts_)), dtype=np.int8)
        for i, x in enumerate(P.points):
            for j, c in enumerate(self.cuts_):
                out[i, j] = _sign(eval_poly(c, x))
        return out

    def predict(self, X) -> np.ndarray:
        S = self.transform(X)
        labels = np.empty(len(S), dtype=np.int64)
        for i, row in enumerate(S):
            if not row.all():
                labels[i] = -1
            else:
                labels[i] = self.cells_.get(tuple(int(v) for v in row), UNSEEN)
        return labels

    def fit_predict(self, X, y=None, sample_weight=None) -> np.ndarray:
        return self.fit(X, sample_weight=sample_weight).predict(X)

    def polynomial_text(self) -> str:
        _require(self, "g_")
        return format_poly(self.g_)


def _multilevel_cfg(est, seed_poly, d) -> MultilevelConfig:
    return MultilevelConfig(c=est.c, beta=Fraction(est.beta), beta_fallback=Fraction(est.beta_fallback),
                            degree_cap=est.degree_cap, restart_budget=est.restart_budget,
                            seed=check_seed(est.seed),
                            seed_polynomial=None if seed_poly is None else parse_poly(seed_poly, d),
                            cover_boxes=est.cover_boxes)


class MultilevelPartitioner(BaseEstimator):
    """The d-level partition of a point set.

    ``predict`` gives a global region label for each point (``-1`` for the
    zero set of the last level or a cell with no fitted points); ``transform``
    gives ``(level, region index)`` pairs.
    """

    def __init__(self, r=8, c=2, beta=Fraction(1, 2), beta_fallback=Fraction(11, 20), degree_cap=None,
                 restart_budget=3, seed_polynomial=None, cover_boxes=8, seed=0):
        self.r = r
        self.c = c
        self.beta = beta
        self.beta_fallback = beta_fallback
        self.degree_cap = degree_cap
        self.restart_budget = restart_budget
        self.seed_polynomial = seed_polynomial
        self.cover_boxes = cover_boxes
        self.seed = seed

    def fit(self, X, y=None, sample_weight=None):
        P = check_points(X, sample_weight)
        mp = build_multipartition(P, check_r(self.r), _multilevel_cfg(self, self.seed_polynomial, P.dim))
        self.multipartition_ = mp
        self.ledger_ = degree_ledger_check(mp)
        self.n_features_in_ = P.dim
        self.labels_index_ = {}
        for lv in mp.levels:
            for reg in lv.regions:
                self.labels_index_[(lv.i, reg.index)] = len(self.labels_index_)
        return self

    def transform(self, X) -> np.ndarray:
        _require(self, "multipartition_")
        P = check_points(X, dim=self.n_features_in_)
        out = np.full((len(P.points), 2), -1, dtype=np.int64)
        for i, x in enumerate(P.points):
            hit = self.multipartition_.locate(x)
            if hit is not None:
                out[i] = hit
        return out

    def predict(self, X) -> np.ndarray:
        T = self.transform(X)
        return np.array([self.labels_index_.get((int(a), int(b)), -1) for a, b in T], dtype=np.int64)

    def fit_predict(self, X, y=None, sample_weight=None) -> np.ndarray:
        return self.fit(X, sample_weight=sample_weight).predict(X)


class RangeCounter(BaseEstimator):
    """Partition tree over weighted points; ``predict`` answers range-counting queries exactly."""

    def __init__(self, n0=64, eta=0.25, c=2, beta=Fraction(1, 2), beta_fallback=Fraction(11, 20),
                 degree_cap=None, restart_budget=3, cover_boxes=8, seed=0):
        self.n0 = n0
        self.eta = eta
        self.c = c
        self.beta = beta
        self.beta_fallback = beta_fallback
        self.degree_cap = degree_cap
        self.restart_budget = restart_budget
        self.cover_boxes = cover_boxes
        self.seed = seed

    def fit(self, X, y=None, sample_weight=None):
        P = check_points(X, sample_weight)
        seed = check_seed(self.seed)
        self.tree_ = build_tree(P, TreeParams(n0=self.n0, eta=self.eta,
                                              multilevel=_multilevel_cfg(self, None, P.dim), seed=seed))
        self.n_features_in_ = P.dim
        return self

    def count(self, gamma) -> Fraction:
        """Exact total weight inside one range (a Range or its text form)."""
        _require(self, "tree_")
        w, self.last_stats_ = self.tree_.query(check_range(gamma, self.n_features_in_))
        return w

    def predict(self, ranges) -> np.ndarray:
        """Exact weights (object array of Fractions), one per range."""
        if isinstance(ranges, str):
            ranges = [ranges]
        _require(self, "tree_")
        out = np.empty(len(ranges), dtype=object)
        self.query_stats_ = []
        for i, g in enumerate(ranges):
            out[i] = self.count(g)
            self.query_stats_.append(self.last_stats_)
        return out
