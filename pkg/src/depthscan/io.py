"""CSV curve files, JSON reports and plot-data tables.

Curve files have a header row ``id,t_1,...,t_p`` followed by one row per
curve.  Bivariate data come either as two such files sharing ids and grid or
as one long-format file whose second column is ``component`` (1 or 2).
Floats are written with ``repr``, the shortest string that parses back to
the same double, so files and reports round-trip exactly.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .core import (
    BivariateFunctionalSample,
    DepthScanError,
    FunctionalSample,
    LengthMismatch,
    ShapeMismatch,
    TimeGrid,
)

__all__ = [
    "CurveFileError",
    "read_curves",
    "read_bivariate",
    "write_curves",
    "write_labels",
    "report_document",
    "write_report",
    "read_report",
    "write_plot_data",
]

REPORT_KEYS = ("magnitude", "shape", "r", "fences", "test", "pwd_summary", "meta")


class CurveFileError(DepthScanError):
    """A curve file that cannot be parsed."""


def _num(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise CurveFileError(f"{where}: {text!r} is not a number") from None


def _fmt(x) -> str:
    return repr(float(x))


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except UnicodeDecodeError as exc:
        raise CurveFileError(f"{path}: not UTF-8 text ({exc})") from None
    if not rows:
        raise CurveFileError(f"{path}: empty file")
    return rows


def _parse(path):
    """Header kind, grid and rows ``(id, component, values)`` of a curve file."""
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if not header or header[0].lower() != "id":
        raise CurveFileError(f"{path}: first header cell must be 'id'")
    long_format = len(header) > 1 and header[1].lower() == "component"
    start = 2 if long_format else 1
    grid = np.array([_num(h, f"{path} header") for h in header[start:]])
    parsed = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ShapeMismatch(f"{path} line {lineno}: {len(row)} fields, header has {len(header)}")
        comp = None
        if long_format:
            comp = row[1].strip()
            if comp not in ("1", "2"):
                raise CurveFileError(f"{path} line {lineno}: component must be 1 or 2, got {comp!r}")
            comp = int(comp)
        values = [_num(v, f"{path} line {lineno}") for v in row[start:]]
        parsed.append((row[0].strip(), comp, values))
    return long_format, grid, parsed


def read_curves(path) -> FunctionalSample:
    """Read a univariate curve file."""
    long_format, grid, rows = _parse(path)
    if long_format:
        raise CurveFileError(f"{path}: long-format (component) file given where univariate curves were expected")
    ids = [r[0] for r in rows]
    values = np.array([r[2] for r in rows], dtype=float).reshape(len(rows), grid.size)
    return FunctionalSample(TimeGrid(grid), values, ids)


def read_bivariate(path, second=None) -> BivariateFunctionalSample:
    """Read bivariate curves from a long-format file or from two component files."""
    if second is not None:
        a, b = read_curves(path), read_curves(second)
        if a.grid != b.grid:
            raise ShapeMismatch("component files have different grids")
        if a.ids != b.ids:
            raise LengthMismatch("component files must list the same ids in the same order")
        return BivariateFunctionalSample(a.grid, a.values, b.values, a.ids)
    long_format, grid, rows = _parse(path)
    if not long_format:
        raise CurveFileError(f"{path}: bivariate input needs a 'component' column or a second file")
    parts = {1: {}, 2: {}}
    order = []
    for cid, comp, values in rows:
        if cid in parts[comp]:
            raise CurveFileError(f"{path}: duplicate row for id {cid!r}, component {comp}")
        parts[comp][cid] = values
        if cid not in order:
            order.append(cid)
    missing = [cid for cid in order if cid not in parts[1] or cid not in parts[2]]
    if missing:
        raise LengthMismatch(f"{path}: ids without both components: {missing[:5]}")
    c1 = np.array([parts[1][cid] for cid in order], dtype=float).reshape(len(order), grid.size)
    c2 = np.array([parts[2][cid] for cid in order], dtype=float).reshape(len(order), grid.size)
    return BivariateFunctionalSample(TimeGrid(grid), c1, c2, order)


def _write_text(path, text: str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)


def _csv_text(rows) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def write_curves(path, sample) -> list:
    """Write a sample; bivariate samples go to ``<stem>_1.csv`` and ``<stem>_2.csv``.

    Returns the list of written paths.
    """
    path = Path(path)
    if isinstance(sample, BivariateFunctionalSample):
        stem = path.with_suffix("")
        out = []
        for k, comp in enumerate(sample.components(), start=1):
            target = stem.parent / f"{stem.name}_{k}.csv"
            write_curves(target, comp)
            out.append(target)
        return out
    header = ["id"] + [_fmt(t) for t in sample.grid.points]
    rows = [header] + [[cid] + [_fmt(v) for v in row] for cid, row in zip(sample.ids, sample.values)]
    _write_text(path, _csv_text(rows))
    return [path]


def write_labels(path, ids, labels):
    rows = [["id", "is_outlier"]] + [[cid, "true" if flag else "false"] for cid, flag in zip(ids, labels)]
    _write_text(path, _csv_text(rows))


def report_document(sample, report, config=None, seed=None, version=None) -> dict:
    """JSON-ready report of a detection run (and optional test result)."""
    ids = sample.ids
    scores = report.shape_scores
    test = None
    if report.test_result is not None:
        tr = report.test_result
        test = {
            "statistic": float(tr.statistic),
            "critical_value": float(tr.critical_value),
            "alpha": float(tr.alpha),
            "p_value": float(tr.p_value_estimate),
            "reject": bool(tr.reject),
            "B": int(tr.B),
        }
    return {
        "magnitude": [ids[i] for i in report.magnitude_indices],
        "shape": [ids[i] for i in report.shape_indices],
        "r": {ids[int(i)]: float(v) for i, v in zip(scores.indices, scores.r)},
        "fences": scores.fences.to_dict(),
        "test": test,
        "pwd_summary": {cid: [float(v) for v in row] for cid, row in zip(ids, report.depth_summary)},
        "meta": {
            "seed": seed,
            "config": config if config is None or isinstance(config, dict) else asdict(config),
            "version": version,
            "median_id": ids[report.median_index],
        },
    }


def write_report(path, document: dict):
    missing = [k for k in REPORT_KEYS if k not in document]
    if missing:
        raise ValueError(f"report lacks keys {missing}")
    _write_text(path, json.dumps(document, indent=2) + "\n")


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    missing = [k for k in REPORT_KEYS if k not in doc]
    if missing:
        raise CurveFileError(f"{path}: report lacks keys {missing}")
    return doc


def write_plot_data(directory, sample, report, depths) -> dict:
    """Tables behind the usual displays, restricted to flagged curves and the median.

    * ``curves.csv``: id, flags, component and the curve values.
    * ``pwd_summary.csv``: five-number summary of each curve's pointwise depth.
    * ``pd_pairs.csv``: consecutive-lag depth pairs ``(PWD(t_j), PWD(t_j+1))``.

    ``depths`` is the full-sample ``n x p`` pointwise-depth array.
    """
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    magnitude, shape = set(report.magnitude_indices), set(report.shape_indices)
    chosen = sorted(magnitude | shape | {report.median_index})
    flags = lambda i: ["true" if i in magnitude else "false", "true" if i in shape else "false",
                       "true" if i == report.median_index else "false"]
    ids, t = sample.ids, sample.grid.points
    depths = np.asarray(depths, dtype=float)

    if isinstance(sample, BivariateFunctionalSample):
        comps = (sample.component1, sample.component2)
    else:
        comps = (sample.values,)
    rows = [["id", "magnitude", "shape", "median", "component"] + [_fmt(v) for v in t]]
    for i in chosen:
        for k, comp in enumerate(comps, start=1):
            rows.append([ids[i]] + flags(i) + [str(k)] + [_fmt(v) for v in comp[i]])
    paths = {"curves": directory / "curves.csv"}
    _write_text(paths["curves"], _csv_text(rows))

    rows = [["id", "magnitude", "shape", "median", "min", "q1", "median_depth", "q3", "max"]]
    for i in chosen:
        rows.append([ids[i]] + flags(i) + [_fmt(v) for v in report.depth_summary[i]])
    paths["pwd_summary"] = directory / "pwd_summary.csv"
    _write_text(paths["pwd_summary"], _csv_text(rows))

    rows = [["id", "magnitude", "shape", "median", "t", "pwd_t", "pwd_next"]]
    for i in chosen:
        for j in range(t.size - 1):
            rows.append([ids[i]] + flags(i) + [_fmt(t[j]), _fmt(depths[i, j]), _fmt(depths[i, j + 1])])
    paths["pd_pairs"] = directory / "pd_pairs.csv"
    _write_text(paths["pd_pairs"], _csv_text(rows))
    return paths
