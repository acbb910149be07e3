"""CSV, JSON and binary persistence for ensembles, densities, grids and estimates."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .freeconv import GriddedMeasure
from .limitshape import HeightGrid, ShapeGrid
from .sampling import BoundaryData, PathEnsemble, TimeGrid
from .statistics import CorrelationEstimate, GapHistogram

MAGIC = b"BLEN1"
_HEADER = struct.Struct("<5sIIdd")


# ---------------------------------------------------------------- ensembles

def write_ensemble_csv(ensemble: PathEnsemble, path) -> None:
    times = ensemble.grid.times
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_index", "time_index", "time", "position"])
        for j, row in enumerate(ensemble.positions):
            for s, x in enumerate(row):
                w.writerow([j, s, repr(float(times[s])), repr(float(x))])


def read_ensemble_csv(path, sigma: float | None = None) -> PathEnsemble:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = int(rows[:, 0].max()) + 1
    cols = int(rows[:, 1].max()) + 1
    pos = np.empty((n, cols))
    pos[rows[:, 0].astype(int), rows[:, 1].astype(int)] = rows[:, 3]
    times = np.empty(cols)
    times[rows[:, 1].astype(int)] = rows[:, 2]
    return _ensemble(pos, times[0], times[-1], sigma)


def _ensemble(pos, t0, t1, sigma):
    grid = TimeGrid(float(t0), float(t1), pos.shape[1] - 1)
    bd = BoundaryData(pos[:, 0], pos[:, -1], sigma=sigma)
    return PathEnsemble(bd, grid, pos)


def write_ensemble_binary(ensemble: PathEnsemble, path) -> None:
    """magic, uint32 n, uint32 columns, float64 t_start, t_end, then row-major doubles."""
    pos = np.ascontiguousarray(ensemble.positions, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, pos.shape[0], pos.shape[1],
                              ensemble.grid.t_start, ensemble.grid.t_end))
        fh.write(pos.tobytes())


def read_ensemble_binary(path, sigma: float | None = None) -> PathEnsemble:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated ensemble file")
    magic, n, cols, t0, t1 = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("not an ensemble dump")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != n * cols:
        raise ValueError("ensemble dump has the wrong length")
    return _ensemble(body.reshape(n, cols).astype(float), t0, t1, sigma)


# ---------------------------------------------------------------- densities

def write_density_csv(measure: GriddedMeasure, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for x, v in zip(measure.nodes, measure.values):
            w.writerow([repr(float(x)), repr(float(v))])


def density_to_dict(measure: GriddedMeasure) -> dict:
    return {"x_min": measure.x_min, "dx": measure.dx,
            "values": [float(v) for v in measure.values], "mass": measure.mass}


def density_from_dict(d: dict) -> GriddedMeasure:
    return GriddedMeasure.from_density(d["x_min"], d["dx"], np.asarray(d["values"], float))


def write_density_json(measure: GriddedMeasure, path) -> None:
    Path(path).write_text(json.dumps(density_to_dict(measure)))


def read_density_json(path) -> GriddedMeasure:
    return density_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------- grids

def write_grid_csv(grid, path) -> None:
    second = grid.y if isinstance(grid, ShapeGrid) else grid.x
    label = "y" if isinstance(grid, ShapeGrid) else "x"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", label, "value"])
        for i, t in enumerate(grid.t):
            for j, s in enumerate(second):
                w.writerow([repr(float(t)), repr(float(s)), repr(float(grid.values[i, j]))])


def grid_to_dict(grid) -> dict:
    if isinstance(grid, ShapeGrid):
        return {"kind": "shape", "rect": [*grid.t_range, *grid.y_range],
                "resolution": list(grid.values.shape), "epsilon": grid.eps,
                "residual_norm": None if np.isnan(grid.residual_norm) else grid.residual_norm,
                "values": grid.values.tolist()}
    return {"kind": "height", "rect": [*grid.t_range, *grid.x_range],
            "resolution": list(grid.values.shape), "values": grid.values.tolist()}


def grid_from_dict(d: dict):
    r = d["rect"]
    vals = np.asarray(d["values"], float)
    if d.get("kind", "shape") == "shape":
        res = d.get("residual_norm")
        return ShapeGrid((r[0], r[1]), (r[2], r[3]), vals, d.get("epsilon", 0.0),
                         float("nan") if res is None else res)
    return HeightGrid((r[0], r[1]), (r[2], r[3]), vals)


def write_grid_json(grid, path) -> None:
    Path(path).write_text(json.dumps(grid_to_dict(grid)))


def read_grid_json(path):
    return grid_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------- estimates

def write_estimate_json(est: CorrelationEstimate, path) -> None:
    Path(path).write_text(json.dumps(est.to_dict()))


def write_histogram_csv(hist: GapHistogram, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_left", "bin_right", "mass"])
        for lo, hi, m in zip(hist.edges[:-1], hist.edges[1:], hist.mass):
            w.writerow([repr(float(lo)), repr(float(hi)), repr(float(m))])
