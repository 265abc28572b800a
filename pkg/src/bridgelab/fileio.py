"""Plain-text persistence: CSV tables with '#' metadata lines, JSON reports.

Every CSV starts with '# key=value' metadata lines, then one mandatory
header row naming the columns.  Floats are written as ``f"{v:.17e}"`` (17
significant digits), which round-trips IEEE double exactly, so saving and
reloading a measure reproduces it bit for bit.  JSON reports are written
with sorted keys and a fixed indent; byte-identical inputs give
byte-identical files.
"""
from __future__ import annotations

import json
import math
from typing import Mapping

import numpy as np

from .bridges import FKKernel
from .measures import DiscreteMeasure, Grid, PairMeasure

__all__ = [
    "write_table",
    "read_table",
    "save_measure",
    "load_measure",
    "save_pair_measure",
    "load_pair_measure",
    "save_kernel",
    "load_kernel",
    "save_report",
    "load_report",
]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17e}"
    s = str(v)
    if "," in s or "\n" in s or "=" in s:
        raise ValueError(f"metadata value {s!r} contains a reserved character")
    return s


def _parse_scalar(s: str):
    if s == "true":
        return True
    if s == "false":
        return False
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def write_table(
    path: str,
    columns: Mapping[str, np.ndarray],
    metadata: Mapping[str, object] | None = None,
) -> None:
    """Write named columns as CSV, '#'-metadata first, header row mandatory."""
    names = list(columns)
    if not names:
        raise ValueError("at least one column is required")
    arrays = [np.asarray(columns[n]) for n in names]
    length = arrays[0].shape[0]
    for n, a in zip(names, arrays):
        if a.ndim != 1 or a.shape[0] != length:
            raise ValueError(f"column {n!r} is not a 1-d array of length {length}")
    with open(path, "w", newline="\n") as f:
        for k, v in (metadata or {}).items():
            f.write(f"# {k}={_fmt(v)}\n")
        f.write(",".join(names) + "\n")
        for i in range(length):
            f.write(",".join(_fmt(a[i]) for a in arrays) + "\n")


def read_table(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a CSV written by :func:`write_table`: (metadata, columns)."""
    meta: dict = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                key, _, val = body.partition("=")
                meta[key.strip()] = val
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    if header is None:
        raise ValueError(f"{path} has no header row")
    meta = {k: _parse_scalar(v) if "," not in str(v) else v for k, v in meta.items()}
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        raw = [r[j] for r in rows]
        try:
            columns[name] = np.array([int(x) for x in raw], dtype=np.int64)
        except ValueError:
            columns[name] = np.array([float(x) for x in raw])
    return meta, columns


def _grid_meta(grid: Grid) -> dict:
    return {
        "dimension": grid.dimension,
        "lower": ",".join(f"{v:.17e}" for v in grid.lower),
        "upper": ",".join(f"{v:.17e}" for v in grid.upper),
        "points_per_axis": grid.points_per_axis,
    }


def _grid_from_meta(meta: Mapping) -> Grid:
    lower = tuple(float(x) for x in str(meta["lower"]).split(","))
    upper = tuple(float(x) for x in str(meta["upper"]).split(","))
    return Grid(lower=lower, upper=upper, points_per_axis=int(meta["points_per_axis"]))


def save_measure(path: str, measure: DiscreteMeasure, extra: Mapping | None = None) -> None:
    g = measure.grid
    meta = {"kind": "measure", **_grid_meta(g), "is_probability": measure.is_probability}
    meta.update(extra or {})
    cols = {"node": np.arange(g.n_nodes)}
    for k in range(g.dimension):
        cols[f"x{k}"] = g.nodes[:, k]
    cols["weight"] = measure.weights
    write_table(path, cols, meta)


def load_measure(path: str) -> DiscreteMeasure:
    meta, cols = read_table(path)
    if meta.get("kind") != "measure":
        raise ValueError(f"{path} does not hold a measure")
    grid = _grid_from_meta(meta)
    weights = np.zeros(grid.n_nodes)
    weights[cols["node"]] = cols["weight"]
    return DiscreteMeasure(grid, weights, is_probability=bool(meta["is_probability"]))


def save_pair_measure(path: str, q: PairMeasure, extra: Mapping | None = None) -> None:
    """Sparse rows (i, j, weight) over the support; zeros are implicit."""
    g = q.grid
    meta = {"kind": "pair_measure", **_grid_meta(g), "is_probability": q.is_probability}
    meta.update(extra or {})
    i, j = np.nonzero(q.weights)
    write_table(path, {"i": i, "j": j, "weight": q.weights[i, j]}, meta)


def load_pair_measure(path: str) -> PairMeasure:
    meta, cols = read_table(path)
    if meta.get("kind") != "pair_measure":
        raise ValueError(f"{path} does not hold a pair measure")
    grid = _grid_from_meta(meta)
    w = np.zeros((grid.n_nodes, grid.n_nodes))
    w[cols["i"], cols["j"]] = cols["weight"]
    return PairMeasure(grid, w, is_probability=bool(meta["is_probability"]))


def save_kernel(path: str, fk: FKKernel, extra: Mapping | None = None) -> None:
    g = fk.grid
    meta = {
        "kind": "kernel",
        **_grid_meta(g),
        "beta": fk.beta,
        "steps": fk.steps,
        "undermixed": fk.undermixed,
    }
    meta.update(extra or {})
    i, j = np.nonzero(fk.matrix)
    write_table(path, {"i": i, "j": j, "value": fk.matrix[i, j]}, meta)


def load_kernel(path: str) -> FKKernel:
    meta, cols = read_table(path)
    if meta.get("kind") != "kernel":
        raise ValueError(f"{path} does not hold a kernel")
    grid = _grid_from_meta(meta)
    mat = np.zeros((grid.n_nodes, grid.n_nodes))
    mat[cols["i"], cols["j"]] = cols["value"]
    return FKKernel(
        grid=grid,
        beta=float(meta["beta"]),
        steps=int(meta["steps"]),
        matrix=mat,
        undermixed=bool(meta["undermixed"]),
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan literals; degrade to strings rather than fail.
        return v if math.isfinite(v) else repr(v)
    return obj


def save_report(path: str, report: Mapping) -> None:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    text = json.dumps(_jsonable(dict(report)), indent=2, sort_keys=True, allow_nan=False)
    with open(path, "w", newline="\n") as f:
        f.write(text + "\n")


def load_report(path: str) -> dict:
    with open(path) as f:
        return json.load(f)
