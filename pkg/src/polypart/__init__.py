"""Multilevel polynomial partitions and partition trees for semialgebraic range counting."""

from .cells import And, Atom, Not, Or, Range, Verdict, classify, count_crossed, format_range, parse_range
from .estimators import MultilevelPartitioner, PolynomialPartitioner, RangeCounter
from .groebner import GBasis, GroebnerBudget, IdealGens, buchberger, is_groebner_basis, normal_form
from .multilevel import MultilevelConfig, MultiPartition, build_multipartition, degree_ledger_check
from .partition import PartitionConfig, PartitionResult, PointMultiset, ham_sandwich_cut, partitioning_polynomial
from .poly import LinearMap, MPoly, eval_poly, format_poly, parse_poly
from .projection import ProjectionCertificate, VarietyHandle, build_projection, verify_certificate
from .rangesearch import PartitionTree, TreeParams, brute_force_count, build_tree, query

__version__ = "0.1.0"

__all__ = [
    "And", "Atom", "Not", "Or", "Range", "Verdict", "classify", "count_crossed", "format_range", "parse_range",
    "MultilevelPartitioner", "PolynomialPartitioner", "RangeCounter",
    "GBasis", "GroebnerBudget", "IdealGens", "buchberger", "is_groebner_basis", "normal_form",
    "MultilevelConfig", "MultiPartition", "build_multipartition", "degree_ledger_check",
    "PartitionConfig", "PartitionResult", "PointMultiset", "ham_sandwich_cut", "partitioning_polynomial",
    "LinearMap", "MPoly", "eval_poly", "format_poly", "parse_poly",
    "ProjectionCertificate", "VarietyHandle", "build_projection", "verify_certificate",
    "PartitionTree", "TreeParams", "brute_force_count", "build_tree", "query",
]
