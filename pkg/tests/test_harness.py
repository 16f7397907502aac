import json
from fractions import Fraction

import pytest

from polypart.cells import And, parse_range
from polypart.harness import cli
from polypart.harness.experiments import Experiment, experiment_from_config, fit_slope, run_experiment
from polypart.harness.generators import circle_point, generate_points, generate_ranges, range_signature
from polypart.harness.io import (points_csv_text, read_config, read_points_csv, read_ranges, write_points_csv,
                                 write_ranges)
from polypart.partition import PointMultiset
from polypart.poly import eval_poly, parse_poly

F = Fraction


# ---- generators
def test_on_circle_points_are_exact():
    P = generate_points("on-circle", 4, seed=0)
    assert all(x * x + y * y == 1 for x, y in P.points)
    assert circle_point(F(1, 2)) == (F(3, 5), F(4, 5))


def test_on_line_points():
    assert generate_points("on-line", 8).points == tuple((F(i), F(0)) for i in range(8))


def test_moment_curve_points():
    P = generate_points("moment-curve", 20, seed=1, d=3)
    assert all(y == x**2 and z == x**3 for x, y, z in P.points)


@pytest.mark.parametrize("spec,n", [("uniform", 0), ("nope", 5)])
def test_point_generator_errors(spec, n):
    with pytest.raises(ValueError):
        generate_points(spec, n, seed=0)


def test_generators_are_deterministic():
    assert generate_points("clustered", 50, seed=4) == generate_points("clustered", 50, seed=4)
    a = [str(r) for r in generate_ranges("annuli", 5, seed=2)]
    assert a == [str(r) for r in generate_ranges("annuli", 5, seed=2)]


def test_range_shapes():
    hs = generate_ranges("halfspaces", 10, seed=0)
    assert range_signature(hs) == (1, 1)
    (ann,) = generate_ranges("annuli", 1, seed=0)
    assert isinstance(ann.formula, And) and ann.s == 2 and ann.degree == 2
    outer, inner = ann.atoms
    # (x-c)^2 + (y-c)^2 - r1^2 >= 0  and  r2^2 - (x-c)^2 - (y-c)^2 >= 0
    assert outer + inner == (outer + inner).__class__.constant((outer + inner).coefficient((0, 0)), 2)
    assert range_signature(generate_ranges("ellipsoid-pairs", 3, seed=0)) == (2, 2)
    with pytest.raises(ValueError):
        generate_ranges("cubes", 1)


def test_disk_membership_of_origin_is_exact():
    disk = parse_range("(1/4 - (x1 - 1/2)^2 - x2^2 >= 0)", 2)
    assert disk.contains((0, 0))  # on the boundary circle
    assert eval_poly(disk.atoms[0], (0, 0)) == 0


# ---- io
def test_csv_round_trip(tmp_path):
    P = PointMultiset(((F(1, 3), F(-2)), (F(5, 7), F(1, 10))), (F(2), F(1, 2)))
    path = tmp_path / "p.csv"
    write_points_csv(path, P, with_weights=True)
    assert read_points_csv(path) == P
    assert points_csv_text(P).splitlines()[0] == "x1,x2"


def test_csv_decimals_are_exact(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("0.1,0.2\n1/3,-2.5\n")
    P = read_points_csv(path)
    assert P.points == ((F(1, 10), F(1, 5)), (F(1, 3), F(-5, 2)))


def test_csv_errors(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("x,y\n1,2\n1\n")
    with pytest.raises(ValueError):
        read_points_csv(path)
    path.write_text("1,abc\n")
    with pytest.raises(ValueError):
        read_points_csv(path)


def test_config_and_ranges(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nn0 = 32\nbeta_fallback = 3/5  # trailing\n")
    assert read_config(cfg) == {"n0": "32", "beta-fallback": "3/5"}
    rg = tmp_path / "r.txt"
    ranges = generate_ranges("annuli", 3, seed=1)
    write_ranges(rg, ranges)
    assert read_ranges(rg, 2) == ranges


# ---- experiments
def test_fit_slope():
    assert fit_slope([1, 2, 4, 8], [3, 6, 12, 24]) == pytest.approx(1.0)
    assert fit_slope([4, 16, 64], [2, 4, 8]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fit_slope([2], [3])


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        experiment_from_config("partition-check", {"bogus": "1"}, seed=0)
    with pytest.raises(ValueError):
        experiment_from_config("nope", {}, seed=0)
    with pytest.raises(ValueError):
        Experiment("nope", {}, {}, 0)


def test_csv_is_byte_identical_on_rerun(tmp_path):
    cfg = {"n": "400,900", "r": "4,8"}
    a = run_experiment(experiment_from_config("partition-check", cfg, seed=3, output=str(tmp_path / "a.csv")))
    b = run_experiment(experiment_from_config("partition-check", cfg, seed=3, output=str(tmp_path / "b.csv"),
                                              workers=2))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a.hard_pass and b.hard_pass and len(a.rows) == 4
    summary = json.loads((tmp_path / "a.json").read_text())
    assert summary["hard_pass"] and "timing_seconds" in summary


def test_failed_cell_is_a_hard_failure():
    rep = run_experiment(experiment_from_config("partition-check", {"dist": "bogus"}, seed=0))
    assert not rep.hard_pass and rep.summary["failures"]


def test_projection_suite_experiment():
    rep = run_experiment(experiment_from_config("projection-suite", {}, seed=1))
    assert rep.hard_pass and all(r["retries"] <= 5 and r["reverified"] for r in rep.rows)


def test_query_scaling_small():
    rep = run_experiment(experiment_from_config("query-scaling", {"n": "256,512", "queries": "10"}, seed=2))
    assert rep.hard_pass and "slope" in rep.summary


# ---- CLI
@pytest.fixture
def files(tmp_path):
    write_points_csv(tmp_path / "u.csv", generate_points("uniform", 400, seed=3))
    (tmp_path / "circle.txt").write_text("x1^2 + x2^2 - 1\n")
    (tmp_path / "hyp.txt").write_text("x1*x2 - 1\n")
    (tmp_path / "r.txt").write_text("(x1 - 1/2 >= 0)\n# comment\n(1/16 - (x1 - 1/2)^2 - (x2 - 1/2)^2 >= 0)\n")
    return tmp_path


def test_cli_partition(files, capsys):
    assert cli.main(["partition", "--points", str(files / "u.csv"), "--r", "8", "--seed", "1",
                     "--out", str(files / "mp.json")]) == 0
    data = json.loads((files / "mp.json").read_text())
    assert data["checks"]["ledger"]["ok"]
    assert cli.main(["partition", "--points", str(files / "u.csv"), "--r", "8", "--seed", "1", "--single"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_cli_seed_is_mandatory(files, capsys):
    assert cli.main(["partition", "--points", str(files / "u.csv"), "--r", "8"]) == 1
    assert "--seed" in capsys.readouterr().err
    assert cli.main(["build-tree", "--points", str(files / "u.csv"), "--out", str(files / "t.json")]) == 1
    assert cli.main(["experiment", "projection-suite"]) == 1


def test_cli_tree_and_query(files, capsys):
    assert cli.main(["build-tree", "--points", str(files / "u.csv"), "--seed", "2", "--n0", "32",
                     "--out", str(files / "t.json")]) == 0
    assert cli.main(["query", "--tree", str(files / "t.json"), "--ranges", str(files / "r.txt"), "--check",
                     "--out", str(files / "ans.csv")]) == 0
    rows = (files / "ans.csv").read_text().splitlines()
    assert len(rows) == 3 and all(r.endswith("true") for r in rows[1:])
    capsys.readouterr()
    assert cli.main(["query", "--tree", str(files / "t.json"), "--range", "(x1 >= 0)"]) == 0
    assert capsys.readouterr().out.splitlines()[1].split(",")[1] == "400"


def test_cli_config_file(files):
    (files / "tree.cfg").write_text("points = %s\nseed = 4\nn0 = 40\nout = %s\n" % (files / "u.csv",
                                                                                   files / "t2.json"))
    assert cli.main(["build-tree", "--config", str(files / "tree.cfg")]) == 0
    assert (files / "t2.json").exists()
    (files / "bad.cfg").write_text("nonsense = 1\n")
    assert cli.main(["build-tree", "--config", str(files / "bad.cfg")]) == 1


def test_cli_experiment(files):
    out = files / "e.csv"
    assert cli.main(["experiment", "partition-check", "--seed", "5", "--n", "300", "--set", "r=4",
                     "--out", str(out)]) == 0
    first = out.read_bytes()
    assert cli.main(["experiment", "partition-check", "--seed", "5", "--n", "300", "--set", "r=4",
                     "--out", str(out)]) == 0
    assert out.read_bytes() == first
    assert cli.main(["experiment", "partition-check", "--seed", "5", "--dist", "bogus"]) == 1
    assert cli.main(["experiment", "partition-check", "--seed", "5", "--unknown", "1"]) == 1


def test_cli_certify_projection(files):
    cert = files / "cert.json"
    assert cli.main(["certify-projection", "--ideal", str(files / "hyp.txt"), "--nvars", "2", "--seed", "3",
                     "--out", str(cert)]) == 0
    assert cli.main(["certify-projection", "--ideal", str(files / "hyp.txt"), "--nvars", "2",
                     "--verify", str(cert)]) == 0
    data = json.loads(cert.read_text())
    data["matrix"] = [["1", "0"]]
    cert.write_text(json.dumps(data))
    assert cli.main(["certify-projection", "--ideal", str(files / "hyp.txt"), "--nvars", "2",
                     "--verify", str(cert)]) == 1


def test_cli_usage_errors():
    assert cli.main([]) == 1
    assert cli.main(["partition"]) == 1
