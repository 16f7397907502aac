"""Command line: ``polypart <verb> [options]``.

Verbs: partition, build-tree, query, experiment, certify-projection.  Every
option can also come from a flat ``key = value`` file given with ``--config``;
explicit flags win.  Randomized verbs require ``--seed``.  Exit status is 0 on
success and 1 on any failed check or error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..cells import format_range
from ..groebner import BudgetExceeded, GroebnerBudget, ideal_from_text
from ..multilevel import MultilevelConfig, MultilevelError, build_multipartition, degree_ledger_check
from ..partition import PartitionConfig, PartitionError, partitioning_polynomial
from ..poly import format_poly, parse_poly
from ..projection import ProjectionCertificate, ProjectionError, VarietyHandle, build_projection, verify_certificate
from ..rangesearch import PartitionTree, TreeBuildError, TreeParams, brute_force_count, build_tree, oracle_parts
from ..validation import check_r, check_range, check_seed
from .experiments import KINDS, experiment_from_config, run_experiment
from .io import read_config, read_points_csv, read_ranges, write_json

log = logging.getLogger("polypart")


class CLIError(Exception):
    pass


def _frac(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError("not a rational number: %r" % text) from None


def _multilevel_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c", type=int, default=2, help="level exponent base (r_i = r^(c^(i-1)))")
    p.add_argument("--beta", type=_frac, default=Fraction(1, 2))
    p.add_argument("--beta-fallback", type=_frac, default=Fraction(11, 20))
    p.add_argument("--degree-cap", type=int, default=None)
    p.add_argument("--restart-budget", type=int, default=3)
    p.add_argument("--max-shear-retries", type=int, default=5)
    p.add_argument("--cover-boxes", type=int, default=8)


def _multilevel_config(a, seed: int, seed_polynomial=None) -> MultilevelConfig:
    return MultilevelConfig(c=a.c, beta=a.beta, beta_fallback=a.beta_fallback, degree_cap=a.degree_cap,
                            restart_budget=a.restart_budget, seed=seed, seed_polynomial=seed_polynomial,
                            max_shear_retries=a.max_shear_retries, cover_boxes=a.cover_boxes)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="polypart", description=__doc__.splitlines()[0])
    top.add_argument("-v", "--verbose", action="store_true")
    sub = top.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("partition", help="partition a point file (multilevel by default)")
    p.add_argument("--points", required=True, help="CSV of points")
    p.add_argument("--r", type=_frac, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--single", action="store_true", help="one partitioning polynomial instead of d levels")
    p.add_argument("--seed-polynomial", help="use this polynomial as the level-1 partition")
    p.add_argument("--out", help="JSON output path (default: stdout summary only)")
    _multilevel_flags(p)

    p = sub.add_parser("build-tree", help="build a partition tree from a point file")
    p.add_argument("--points", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n0", type=int, default=64, help="leaf size")
    p.add_argument("--eta", type=float, default=0.25, help="r = n^eta at each node")
    p.add_argument("--out", required=True, help="tree JSON path")
    _multilevel_flags(p)

    p = sub.add_parser("query", help="count points of a stored tree inside ranges")
    p.add_argument("--tree", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--range", dest="range_text", help="one range in text form")
    g.add_argument("--ranges", help="file with one range per line")
    p.add_argument("--check", action="store_true", help="compare every answer with the brute-force count")
    p.add_argument("--out", help="CSV of answers (default: stdout)")

    p = sub.add_parser("experiment", help="run an experiment grid; extra --key value pairs set its parameters")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV path; the JSON summary goes next to it")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    p = sub.add_parser("certify-projection", help="certify (or re-verify) a generic projection of a variety")
    p.add_argument("--ideal", required=True, help="file with one generator per line")
    p.add_argument("--nvars", type=int, required=True)
    p.add_argument("--k", type=int, help="target dimension (default: dimension of the variety)")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-retries", type=int, default=5)
    p.add_argument("--verify", help="re-check this certificate JSON instead of building one")
    p.add_argument("--out", help="certificate JSON path")
    for sp in sub.choices.values():
        sp.add_argument("--config", help="key=value file with defaults for these options")
    return top


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> tuple[argparse.Namespace, list[str]]:
    """Parse twice: once to find the verb and ``--config``, then with file values as defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    found, _ = pre.parse_known_args(argv)
    verbs = parser._subparsers._group_actions[0].choices
    verb = next((t for t in argv if t in verbs), None)
    if not found.config or verb is None:
        return parser.parse_known_args(argv)
    sp = verbs[verb]
    dests = {act.dest: act for act in sp._actions}
    cfg = read_config(found.config)
    defaults, leftovers = {}, []
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        act = dests.get(dest)
        if act is None or dest in ("config", "help"):
            if verb == "experiment":
                leftovers += ["--" + key, value]
                continue
            raise CLIError("%s: unknown setting %r for %s" % (found.config, key, verb))
        if act.nargs == 0:
            defaults[dest] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[dest] = act.type(value) if act.type else value
    sp.set_defaults(**defaults)
    # Required options satisfied by the file must not fail the second parse.
    for act in sp._actions:
        if act.dest in defaults:
            act.required = False
    a, extra = parser.parse_known_args(argv)
    return a, leftovers + extra


def _need_seed(a) -> int:
    if a.seed is None:
        raise CLIError("--seed is required for %s" % a.verb)
    return check_seed(a.seed)


def _cmd_partition(a) -> int:
    seed = _need_seed(a)
    P = read_points_csv(a.points)
    r = check_r(a.r)
    if a.single:
        res = partitioning_polynomial(P, r, PartitionConfig(beta=a.beta, beta_fallback=a.beta_fallback,
                                                            degree_cap=a.degree_cap,
                                                            restart_budget=a.restart_budget, seed=seed))
        cap = Fraction(P.size) / r
        ok = res.max_cell() <= cap
        data = {"g": format_poly(res.g), "cuts": [format_poly(c.poly) for c in res.cuts], "r": str(r),
                "degree": res.degree, "cells": len(res.cell_counts()), "max_cell": res.max_cell(),
                "cap": str(cap), "ok": ok, "stats": res.stats, "seed": seed}
        print("degree %d, %d cells, max cell %d (cap %s): %s"
              % (res.degree, len(res.cell_counts()), res.max_cell(), cap, "PASS" if ok else "FAIL"))
    else:
        seed_poly = parse_poly(a.seed_polynomial, P.dim) if a.seed_polynomial else None
        mp = build_multipartition(P, r, _multilevel_config(a, seed, seed_poly))
        chk = mp.check_partition()
        audit = degree_ledger_check(mp)
        ok = chk["disjoint_cover"] and chk["sizes_ok"] and audit["ok"]
        data = mp.to_json()
        data["checks"] = {"partition": chk, "ledger": audit}
        for lv in chk["levels"]:
            print("level %d: max region %d (bound %s)" % (lv["level"], lv["max_region"], lv["bound"]))
        print("ledger %s, |P*| = %d <= %d: %s" % (audit["ledger"], audit["p_star"], audit["p_star_bound"],
                                                    "PASS" if ok else "FAIL"))
    if a.out:
        write_json(a.out, data)
    return 0 if ok else 1


def _cmd_build_tree(a) -> int:
    seed = _need_seed(a)
    P = read_points_csv(a.points)
    T = build_tree(P, TreeParams(n0=a.n0, eta=a.eta, multilevel=_multilevel_config(a, seed), seed=seed))
    inv = T.check_invariants()
    ok = all(v for k, v in inv.items() if isinstance(v, bool)) and T.ledger_ok()
    Path(a.out).write_text(T.dumps())
    print("%d points, %d nodes, height %d, invariants %s" % (inv["n"], sum(1 for _ in T.nodes()), T.height(),
                                                             "PASS" if ok else "FAIL"))
    return 0 if ok else 1


def _cmd_query(a) -> int:
    T = PartitionTree.loads(Path(a.tree).read_text())
    ranges = [check_range(a.range_text, T.dim)] if a.range_text else read_ranges(a.ranges, T.dim)
    parts = oracle_parts(T.points) if a.check else None
    lines = ["index,weight,nodes_visited,regions_classified" + (",oracle,match" if a.check else "")]
    ok = True
    for i, g in enumerate(ranges):
        w, st = T.query(g)
        row = [str(i), str(w), str(st.nodes_visited), str(st.regions_classified)]
        if a.check:
            b = brute_force_count(T.points, g, _parts=parts)
            ok &= b == w
            row += [str(b), "true" if b == w else "false"]
            if b != w:
                log.error("range %d (%s): tree %s, oracle %s", i, format_range(g), w, b)
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if a.out:
        Path(a.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


def _experiment_settings(a, extra: list[str]) -> dict:
    settings = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise CLIError("unexpected argument %r" % tok)
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            value = next(it, None)
            if value is None:
                raise CLIError("missing value for %s" % tok)
        settings[key.replace("_", "-")] = value
    for item in a.set:
        if "=" not in item:
            raise CLIError("--set expects KEY=VALUE, got %r" % item)
        k, v = item.split("=", 1)
        settings[k.strip().replace("_", "-")] = v.strip()
    return settings


def _cmd_experiment(a, extra: list[str]) -> int:
    seed = _need_seed(a)
    e = experiment_from_config(a.kind, _experiment_settings(a, extra), seed, a.out, a.workers)
    rep = run_experiment(e)
    if not a.out:
        sys.stdout.write(rep.csv_text())
    s = rep.summary
    for f in s.get("failures", []):
        log.error("cell %s failed: %s", f["cell"], f["error"])
    if "slope" in s:
        print("slope %.4f (band %s): %s" % (s["slope"], s["band"], "PASS" if s["soft_pass"] else "FAIL"),
              file=sys.stderr)
    print("%s: %s" % (a.kind, "PASS" if rep.hard_pass else "FAIL"), file=sys.stderr)
    return 0 if rep.hard_pass else 1


def _cmd_certify(a) -> int:
    I = ideal_from_text(Path(a.ideal).read_text().splitlines(), a.nvars)
    gens = list(I.gens)
    budget = GroebnerBudget()
    if a.verify:
        cert = ProjectionCertificate.from_json(json.loads(Path(a.verify).read_text()))
        ok = verify_certificate(gens, cert, budget)
        print("certificate %s" % ("verified" if ok else "REJECTED"))
        return 0 if ok else 1
    seed = _need_seed(a)
    V = VarietyHandle.from_polys(gens, a.nvars, budget=budget)
    k = a.k if a.k is not None else V.claimed_dim
    _, cert = build_projection(V, k, np.random.default_rng(seed), a.max_retries, budget)
    ok = verify_certificate(gens, cert, budget)
    data = cert.to_json()
    data["reverified"] = ok
    data["seed"] = seed
    if a.out:
        write_json(a.out, data)
    else:
        print(json.dumps(data, indent=1, sort_keys=True))
    print("%d stages, %d retries, certificate %s" % (len(cert.stages), cert.total_retries,
                                                    "verified" if ok else "REJECTED"), file=sys.stderr)
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        a, extra = _apply_config(parser, argv)
        logging.basicConfig(level=logging.DEBUG if a.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if extra and a.verb != "experiment":
            raise CLIError("unrecognized arguments: %s" % " ".join(extra))
        if a.verb == "partition":
            return _cmd_partition(a)
        if a.verb == "build-tree":
            return _cmd_build_tree(a)
        if a.verb == "query":
            return _cmd_query(a)
        if a.verb == "experiment":
            return _cmd_experiment(a, extra)
        return _cmd_certify(a)
    except SystemExit as exc:  # argparse usage errors
        return 0 if exc.code in (0, None) else 1
    except (CLIError, ValueError, TypeError, OSError, PartitionError, MultilevelError, TreeBuildError,
            ProjectionError, BudgetExceeded) as exc:
        print("polypart: error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
