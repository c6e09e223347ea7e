"""Field output: legacy-VTK structured points and plain CSV."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping

import numpy as np

from .geometry import UnitCellGrid


def _cell_arrays(grid: UnitCellGrid, fields: Mapping[str, np.ndarray]):
    scalars, vectors = {}, {}
    for name, arr in fields.items():
        a = np.asarray(arr)
        if a.shape == (grid.n, grid.n):
            scalars[name] = a.astype(float)
        elif a.shape == (grid.n, grid.n, 2):
            vectors[name] = a.astype(float)
        else:
            raise ValueError(f"field {name!r} has shape {a.shape}, expected ({grid.n}, {grid.n}[, 2])")
    return scalars, vectors


def write_vtk(path, grid: UnitCellGrid, fields: Mapping[str, np.ndarray], title: str = "porehom") -> Path:
    """Write cell data on the unit cell as ASCII STRUCTURED_POINTS.

    Scalars have shape (n, n), vectors (n, n, 2); VTK ordering is x fastest.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, h = grid.n, grid.h
    scalars, vectors = _cell_arrays(grid, fields)
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {n + 1} {n + 1} 2",
        "ORIGIN 0 0 0",
        f"SPACING {h!r} {h!r} {h!r}",
        f"CELL_DATA {n * n}",
    ]
    for name, a in scalars.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [" ".join(f"{x:.10g}" for x in a[:, j]) for j in range(n)]
    for name, a in vectors.items():
        lines.append(f"VECTORS {name} double")
        for j in range(n):
            lines.append(" ".join(f"{a[i, j, 0]:.10g} {a[i, j, 1]:.10g} 0" for i in range(n)))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_cell_scalars(path) -> dict[str, np.ndarray]:
    """Minimal reader for files produced by :func:`write_vtk` (scalars only)."""
    tokens = Path(path).read_text().split("\n")
    n = None
    out = {}
    k = 0
    while k < len(tokens):
        line = tokens[k].strip()
        if line.startswith("DIMENSIONS"):
            n = int(line.split()[1]) - 1
        if line.startswith("SCALARS"):
            name = line.split()[1]
            rows = tokens[k + 2: k + 2 + n]
            a = np.array([[float(x) for x in r.split()] for r in rows]).T
            out[name] = a
            k += 2 + n
            continue
        k += 1
    return out


def write_field_csv(path, grid: UnitCellGrid, fields: Mapping[str, np.ndarray]) -> Path:
    """One row per cell: x, y, solid, then each field (vectors as _x/_y)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scalars, vectors = _cell_arrays(grid, fields)
    X, Y = grid.cell_centers()
    header = ["x", "y", "solid"] + list(scalars)
    for name in vectors:
        header += [f"{name}_x", f"{name}_y"]
    cols = [X.ravel(order="F"), Y.ravel(order="F"), grid.solid.ravel(order="F").astype(int)]
    cols += [a.ravel(order="F") for a in scalars.values()]
    for a in vectors.values():
        cols += [a[..., 0].ravel(order="F"), a[..., 1].ravel(order="F")]
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in zip(*cols):
            wr.writerow([repr(float(v)) if not isinstance(v, (np.integer, int)) else int(v) for v in row])
    return path


def write_rows_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def solution_fields(solution) -> dict[str, np.ndarray]:
    """Cell-centered velocity and pressure of a CellSolution for output."""
    vx, vy = solution.w.centers()
    return {"pi": solution.pi, "w": np.stack([vx, vy], axis=-1)}
