import json
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polypart.harness.generators import generate_points
from polypart.multilevel import (MultilevelConfig, MultiPartition, build_multipartition, degree_ledger_check,
                                 nonvanishing_check)
from polypart.partition import PointMultiset
from polypart.poly import eval_poly, parse_poly
from polypart.projection import VarietyHandle

F = Fraction
CIRCLE = parse_poly("x1^2 + x2^2 - 1", 2)


def test_generic_points_single_level():
    P = generate_points("uniform", 64, seed=1)
    mp = build_multipartition(P, 4, MultilevelConfig(seed=0))
    assert len(mp.levels) == 1 and mp.exceptional.size == 0
    assert max(r.count for r in mp.regions) <= 16
    assert mp.check_partition()["disjoint_cover"]


def test_circle_with_seed_polynomial():
    P = generate_points("on-circle", 512, seed=2)
    mp = build_multipartition(P, 8, MultilevelConfig(seed=3, seed_polynomial=CIRCLE))
    lv1, lv2 = mp.levels
    assert lv1.regions == [] and lv1.q_out == 512
    assert lv2.r_i == 64 and lv2.certificate is not None and lv2.certificate.valid
    assert max(r.count for r in lv2.regions) <= F(512, 64)
    audit = degree_ledger_check(mp)
    assert audit["ok"] and audit["p_star"] <= audit["p_star_bound"]


def test_single_point():
    P = PointMultiset(((F(1, 3), F(2, 3)),))
    mp = build_multipartition(P, 4, MultilevelConfig(seed=0))
    assert mp.exceptional_count + sum(r.count for r in mp.regions) == 1


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        build_multipartition(PointMultiset(((0, 0),)), 1)
    with pytest.raises(ValueError):
        build_multipartition(PointMultiset(()), 4)


def _fake(degrees, caps=None, pstar=0):
    caps = caps or [None] * len(degrees)
    levels = [SimpleNamespace(i=i + 1, D_i=d, degree_cap=c, stats={}) for i, (d, c) in enumerate(zip(degrees, caps))]
    ledger, run = [], 1
    for d in degrees:
        run *= d
        ledger.append(run)
    return SimpleNamespace(levels=levels, ledger=ledger, exceptional=np.arange(pstar), exceptional_locations=pstar,
                           exceptional_count=pstar, r=F(4), K=2)


def test_ledger_examples():
    assert degree_ledger_check(_fake([3]))["ledger"] == [3]
    assert degree_ledger_check(_fake([7, 5]))["ledger"][-1] == 35
    bad = degree_ledger_check(_fake([7, 5], caps=[6, None]))
    assert not bad["ok"] and any("level 1" in f for f in bad["flags"])
    over = degree_ledger_check(_fake([2, 3], pstar=7))
    assert not over["ok"]


def test_nonvanishing():
    V = VarietyHandle.from_polys([CIRCLE])
    assert not nonvanishing_check(V, CIRCLE)
    assert nonvanishing_check(V, parse_poly("x1", 2))
    # y vanishes on one of the two lines y(y-1) = 0 yet is not in the ideal
    L = VarietyHandle.from_polys([parse_poly("x2^2 - x2", 2)])
    assert nonvanishing_check(L, parse_poly("x2", 2))


def _check_invariants(mp, P):
    chk = mp.check_partition()
    assert chk["disjoint_cover"] and chk["total"] == P.size and chk["sizes_ok"]
    K = mp.K
    for lv in mp.levels:
        assert mp.r <= lv.r_i <= mp.r ** K
    # separation: distinct regions of a level have distinct projected sign vectors
    for lv in mp.levels:
        seen = {}
        for reg in lv.regions:
            for m in reg.members[:5]:
                y = lv.pi.apply(P.points[m])
                sv = tuple((v > 0) - (v < 0) for v in (eval_poly(c, y) for c in lv.cuts))
                assert sv == reg.sign_id
            assert seen.setdefault(reg.sign_id, reg.index) == reg.index


def test_invariants_on_mixed_input():
    pts = list(generate_points("uniform", 300, seed=5).points) + list(generate_points("on-circle", 100, seed=5).points)
    P = PointMultiset(tuple(pts))
    mp = build_multipartition(P, 8, MultilevelConfig(seed=1))
    _check_invariants(mp, P)


def test_forced_seed_polynomial_is_audited():
    # A forced level-1 polynomial is not balanced for points off its zero set; the audit says so.
    pts = list(generate_points("uniform", 300, seed=5).points) + list(generate_points("on-circle", 100, seed=5).points)
    P = PointMultiset(tuple(pts))
    mp = build_multipartition(P, 8, MultilevelConfig(seed=1, seed_polynomial=CIRCLE))
    chk = mp.check_partition()
    assert chk["disjoint_cover"] and chk["total"] == 400
    assert not chk["levels"][0]["ok"] and chk["levels"][1]["ok"]


def test_determinism_and_json_round_trip():
    P = generate_points("clustered", 400, seed=3)
    a = build_multipartition(P, 8, MultilevelConfig(seed=9))
    b = build_multipartition(P, 8, MultilevelConfig(seed=9))
    ja, jb = json.dumps(a.to_json(), sort_keys=True), json.dumps(b.to_json(), sort_keys=True)
    assert ja == jb
    back = MultiPartition.from_json(json.loads(ja))
    assert json.dumps(back.to_json(), sort_keys=True) == ja


@settings(max_examples=10)
@given(st.integers(0, 1000), st.integers(20, 120), st.sampled_from([2, 4, 8]))
def test_partition_property(seed, n, r):
    P = generate_points("uniform", n, seed=seed, grid=512)
    mp = build_multipartition(P, r, MultilevelConfig(seed=seed))
    _check_invariants(mp, P)
    assert degree_ledger_check(mp)["ok"]
