"""Certified linear projections of varieties onto coordinate spaces.

Each stage shears the top coordinate into the others, recomputes a lex
Gröbner basis and demands a basis element whose leader is a pure power of
the top variable.  When that holds, eliminating the top variable projects the
variety onto the zero set of the elimination ideal with the same dimension.
After ``d - k`` stages an empty elimination ideal certifies that the image is
all of ``C^k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .groebner import (
    BudgetExceeded,
    GBasis,
    GroebnerBudget,
    IdealGens,
    buchberger,
    elimination_gens,
    ideal_dimension,
    pure_power_leader,
)
from .poly import LinearMap, MPoly, format_poly, parse_poly, shear

__all__ = [
    "ProjectionError",
    "VarietyHandle",
    "StageRecord",
    "ProjectionCertificate",
    "random_shear_coeffs",
    "project_once",
    "build_projection",
    "verify_certificate",
]

DEFAULT_LAMBDA = 2**16


class ProjectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class VarietyHandle:
    """A variety given only by generators, a Gröbner basis and a degree ledger."""

    gens: IdealGens
    gb: GBasis | None = None
    claimed_dim: int | None = None
    degree_ledger: int = 1

    def __post_init__(self):
        if self.degree_ledger < 1:
            raise ValueError("degree ledger must be at least 1")

    @classmethod
    def ambient(cls, d: int) -> "VarietyHandle":
        return cls(IdealGens((), d), GBasis((), d), d, 1)

    @classmethod
    def from_polys(cls, polys: Sequence[MPoly], nvars: int | None = None, delta: int = 1,
                   budget: GroebnerBudget | None = None) -> "VarietyHandle":
        polys = list(polys)
        nvars = nvars if nvars is not None else polys[0].nvars
        gens = IdealGens(tuple(polys), nvars)
        gb = buchberger(gens, budget)
        return cls(gens, gb, ideal_dimension(gb), delta)

    @property
    def nvars(self) -> int:
        return self.gens.nvars

    def with_basis(self, budget: GroebnerBudget | None = None) -> "VarietyHandle":
        if self.gb is not None:
            return self
        gb = buchberger(self.gens, budget)
        return VarietyHandle(self.gens, gb, ideal_dimension(gb), self.degree_ledger)

    def add(self, g: MPoly, degree: int) -> "VarietyHandle":
        """Add a generator; the ledger is multiplied by ``degree``.  The basis is recomputed lazily."""
        dim = None if self.claimed_dim is None else max(self.claimed_dim - 1, -1)
        return VarietyHandle(self.gens.add(g), None, dim, self.degree_ledger * max(1, degree))

    def to_json(self) -> dict:
        return {
            "nvars": self.nvars,
            "gens": [format_poly(g) for g in self.gens.gens],
            "gb": None if self.gb is None else [format_poly(g) for g in self.gb.basis],
            "claimed_dim": self.claimed_dim,
            "degree_ledger": self.degree_ledger,
        }

    @classmethod
    def from_json(cls, data: dict) -> "VarietyHandle":
        n = data["nvars"]
        gens = IdealGens(tuple(parse_poly(t, n) for t in data["gens"]), n)
        gb = None if data["gb"] is None else GBasis(tuple(parse_poly(t, n) for t in data["gb"]), n)
        return cls(gens, gb, data["claimed_dim"], data["degree_ledger"])


@dataclass(frozen=True)
class StageRecord:
    axis: int  # 0-based index of the eliminated variable
    lambdas: tuple[int, ...]
    leader_degree: int
    basis_size: int
    retries: int
    dim_before: int | None
    dim_after: int | None

    def to_json(self) -> dict:
        return {
            "axis": self.axis,
            "lambdas": list(self.lambdas),
            "leader_degree": self.leader_degree,
            "basis_size": self.basis_size,
            "retries": self.retries,
            "dim_before": self.dim_before,
            "dim_after": self.dim_after,
        }

    @classmethod
    def from_json(cls, data: dict) -> "StageRecord":
        return cls(data["axis"], tuple(data["lambdas"]), data["leader_degree"], data["basis_size"],
                   data["retries"], data["dim_before"], data["dim_after"])


@dataclass(frozen=True)
class ProjectionCertificate:
    d: int
    k: int
    stages: tuple[StageRecord, ...]
    final_elimination: tuple[str, ...] = ()
    matrix: tuple[tuple[str, ...], ...] = field(default=())

    @property
    def valid(self) -> bool:
        return len(self.stages) == self.d - self.k and not self.final_elimination and all(
            s.leader_degree >= 1 for s in self.stages)

    @property
    def total_retries(self) -> int:
        return sum(s.retries for s in self.stages)

    def linear_map(self) -> LinearMap:
        return LinearMap([[Fraction(v) for v in row] for row in self.matrix])

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "stages": [s.to_json() for s in self.stages],
            "final_elimination": list(self.final_elimination),
            "matrix": [list(r) for r in self.matrix],
            "valid": self.valid,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ProjectionCertificate":
        return cls(data["d"], data["k"], tuple(StageRecord.from_json(s) for s in data["stages"]),
                   tuple(data["final_elimination"]), tuple(tuple(r) for r in data["matrix"]))


def random_shear_coeffs(stage: int, rng: np.random.Generator, lam: int = DEFAULT_LAMBDA) -> tuple[int, ...]:
    """``stage - 1`` integers uniform in ``[1, lam]`` for shearing ``x_stage`` into the lower coordinates."""
    if stage < 1:
        raise ValueError("stage must be at least 1")
    return tuple(int(v) for v in rng.integers(1, lam + 1, size=stage - 1))


def project_once(V: VarietyHandle, rng: np.random.Generator, max_retries: int = 5,
                 budget: GroebnerBudget | None = None, lam: int = DEFAULT_LAMBDA,
                 check_dimension: bool = True):
    """One certified stage: returns ``(shear map, projected handle, record)``.

    The first candidate is the trivial shear; later ones are random.
    """
    i = V.nvars
    if i < 2:
        raise ProjectionError("nothing to project in one variable")
    V = V.with_basis(budget)
    dim = V.claimed_dim if V.claimed_dim is not None else ideal_dimension(V.gb)
    if V.gb.is_unit:
        raise ProjectionError("the variety is empty (unit ideal)")
    if not 1 <= dim <= i - 1:
        raise ProjectionError("stage needs 1 <= dim <= %d, got %d" % (i - 1, dim))
    axis = i - 1
    last_err = None
    for attempt in range(max_retries + 1):
        lambdas = (0,) * axis if attempt == 0 else random_shear_coeffs(i, rng, lam)
        try:
            sheared = [shear(g, axis, lambdas) for g in V.gens.gens]
            G = buchberger(IdealGens(tuple(sheared), i), budget)
        except BudgetExceeded as err:
            last_err = err
            continue
        D = pure_power_leader(G, axis)
        if D is None:
            continue
        elim = elimination_gens(G, axis)
        Gp = GBasis(tuple(elim), i - 1)
        dim_after = ideal_dimension(Gp) if check_dimension else None
        if check_dimension and dim_after != dim:
            # Cannot happen when the leader condition holds; treat as a failed draw.
            continue
        nonconst = tuple(g for g in elim if g.total_degree >= 1)
        Vp = VarietyHandle(IdealGens(nonconst, i - 1), Gp, dim_after if check_dimension else dim, V.degree_ledger)
        record = StageRecord(axis, tuple(lambdas), D, len(G), attempt, dim, dim_after)
        return LinearMap.shear_map(i, axis, lambdas), Vp, record
    msg = "no pure-power leader after %d retries" % max_retries
    if last_err is not None:
        msg += " (%s)" % last_err
    raise ProjectionError(msg)


def _stage_projection(i: int, lambdas: Sequence[int]) -> list[list[int]]:
    # Coordinates after shear and dropping x_i: y_j = x_j - lambda_j x_i.
    return [[(1 if c == j else 0) - (lambdas[j] if c == i - 1 else 0) for c in range(i)] for j in range(i - 1)]


def build_projection(V: VarietyHandle, k: int, rng: np.random.Generator, max_retries: int = 5,
                     budget: GroebnerBudget | None = None, lam: int = DEFAULT_LAMBDA):
    """Compose ``d - k`` certified stages into ``pi: R^d -> R^k``."""
    d = V.nvars
    if not 1 <= k <= d - 1:
        raise ProjectionError("target dimension must lie in [1, d-1]")
    V = V.with_basis(budget)
    dim = ideal_dimension(V.gb)
    if dim != k:
        raise ProjectionError("variety has dimension %d, expected %d" % (dim, k))
    pi = LinearMap.identity(d)
    stages = []
    cur = V
    for _ in range(d - k):
        _, cur, rec = project_once(cur, rng, max_retries, budget, lam)
        stage_map = LinearMap(_stage_projection(cur.nvars + 1, rec.lambdas))
        pi = stage_map.compose(pi)
        stages.append(rec)
    final = tuple(format_poly(g) for g in cur.gb.basis)
    matrix = tuple(tuple(str(v) for v in row) for row in pi.matrix)
    cert = ProjectionCertificate(d, k, tuple(stages), final, matrix)
    if not cert.valid:
        raise ProjectionError("final elimination ideal is not zero: %s" % (final,))
    return LinearMap(pi.matrix, kind="projection"), cert


def verify_certificate(gens: Sequence[MPoly], cert: ProjectionCertificate,
                       budget: GroebnerBudget | None = None) -> bool:
    """Recheck from scratch in coordinates ``y = (pi(x), x_{k+1..d})``.

    The basis must have a pure-power leader in each of ``y_{k+1..d}`` and no
    element in ``y_1..y_k`` alone.
    """
    if not cert.valid:
        return False
    d, k = cert.d, cert.k
    pi = cert.linear_map()
    if pi.shape != (k, d):
        return False
    # pi = [I_k | M]; the completed map is unipotent, its inverse is [I | -M; 0 | I].
    for a in range(k):
        for b in range(k):
            if pi.matrix[a][b] != (1 if a == b else 0):
                return False
    inv = [[Fraction(0)] * d for _ in range(d)]
    for a in range(d):
        inv[a][a] = Fraction(1)
    for a in range(k):
        for b in range(k, d):
            inv[a][b] = -pi.matrix[a][b]
    moved = [g.substitute_affine(inv, nvars=d) for g in gens]
    G = buchberger([m for m in moved if not m.is_zero()], budget, nvars=d)
    if G.is_unit:
        return False
    # Finite projection: every eliminated coordinate has a pure-power leader.
    if any(pure_power_leader(G, j) is None for j in range(k, d)):
        return False
    return not elimination_gens(G, k)
