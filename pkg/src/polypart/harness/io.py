"""CSV point files, key=value configs and range lists."""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from pathlib import Path

from ..cells import Range, format_range, parse_range
from ..partition import PointMultiset
from ..poly import as_rational

__all__ = [
    "read_points_csv",
    "write_points_csv",
    "points_csv_text",
    "read_config",
    "read_ranges",
    "write_ranges",
    "write_json",
]


def _cell(text: str):
    text = text.strip()
    if not text:
        raise ValueError("empty CSV field")
    return as_rational(text)  # decimals and a/b parse exactly


def read_points_csv(path, weights_column: str | None = "weight") -> PointMultiset:
    """Points from CSV; an optional header names a weight column.

    Columns other than the weight column are coordinates.  A first row that
    does not parse as numbers is treated as a header.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError("%s: no points" % path)
    header = None
    try:
        [_cell(v) for v in rows[0]]
    except (ValueError, ZeroDivisionError):
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
    wcol = header.index(weights_column) if header and weights_column in header else None
    pts, wts = [], []
    for lineno, r in enumerate(rows, start=2 if header else 1):
        try:
            vals = [_cell(v) for v in r]
        except (ValueError, ZeroDivisionError) as err:
            raise ValueError("%s:%d: %s" % (path, lineno, err)) from None
        if wcol is not None:
            wts.append(vals.pop(wcol))
        pts.append(tuple(vals))
    if len({len(p) for p in pts}) != 1:
        raise ValueError("%s: rows have different numbers of coordinates" % path)
    if wcol is None:
        return PointMultiset(tuple(pts))
    return PointMultiset(tuple(pts), tuple(wts))


def _fmt(v) -> str:
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else "%d/%d" % (v.numerator, v.denominator)


def points_csv_text(P: PointMultiset, with_weights: bool = False) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    cols = ["x%d" % (i + 1) for i in range(P.dim)]
    w.writerow(cols + (["weight"] if with_weights else []))
    for p, wt, m in zip(P.points, P.weights, P.multiplicities):
        for _ in range(m):
            w.writerow([_fmt(v) for v in p] + ([_fmt(wt)] if with_weights else []))
    return out.getvalue()


def write_points_csv(path, P: PointMultiset, with_weights: bool = False) -> None:
    Path(path).write_text(points_csv_text(P, with_weights))


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment.  Keys use dashes or underscores."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError("%s:%d: expected key=value" % (path, lineno))
        k, v = line.split("=", 1)
        out[k.strip().replace("_", "-")] = v.strip()
    return out


def read_ranges(path, nvars: int | None = None) -> list[Range]:
    """One range per line in the text format; blank lines and ``#`` comments skipped."""
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(parse_range(line, nvars))
    return out


def write_ranges(path, ranges: list[Range]) -> None:
    Path(path).write_text("".join(format_range(r) + "\n" for r in ranges))


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
