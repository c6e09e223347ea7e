"""Streamline tracing on staggered cell velocities and net-flow masks.

A streamline seeded on the periodic boundary of axis j counts as net
through-flow when it completes one full periodic traverse along j.  Cells
visited by such streamlines form the net-flow mask; everything else
(closed recirculation eddies, stagnant pockets) is excluded from mobility
integrals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import UnitCellGrid
from .stokescell import CellVelocity

STAGNATION = 1e-12
REASONS = ("wrap", "stagnation", "max_len", "wall")


@dataclass
class Streamline:
    points: np.ndarray  # (k, 2) unwrapped coordinates
    reason: str
    wraps: int

    @property
    def length(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())


@dataclass
class NetFlowMask:
    cells: np.ndarray
    axis: int

    @property
    def count(self) -> int:
        return int(self.cells.sum())

    def __array__(self, dtype=None):
        return self.cells if dtype is None else self.cells.astype(dtype)


def interpolate(v: CellVelocity, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of the staggered field at points (k, 2), periodic."""
    n = v.grid.n
    x = pts[:, 0] * n
    y = pts[:, 1] * n
    out = np.empty_like(pts, dtype=float)
    # x-component nodes at (i, j + 1/2), y-component nodes at (i + 1/2, j)
    for comp, field, sx, sy in ((0, v.wx, x, y - 0.5), (1, v.wy, x - 0.5, y)):
        i0 = np.floor(sx)
        j0 = np.floor(sy)
        fx, fy = sx - i0, sy - j0
        i0 = i0.astype(int) % n
        j0 = j0.astype(int) % n
        i1, j1 = (i0 + 1) % n, (j0 + 1) % n
        out[:, comp] = (
            field[i0, j0] * (1 - fx) * (1 - fy)
            + field[i1, j0] * fx * (1 - fy)
            + field[i0, j1] * (1 - fx) * fy
            + field[i1, j1] * fx * fy
        )
    return out


def _cells(grid, pts):
    n = grid.n
    ij = np.floor(pts * n).astype(int) % n
    return ij[:, 0], ij[:, 1]


def _trace_many(grid, v, seeds, direction, axis, step, max_len, record=False):
    """Vectorized RK2 tracing in arc length.

    Returns (reasons, wraps, visited, paths): ``visited`` is a boolean
    (n_seeds, n, n) array of cells touched, ``paths`` a list of point
    arrays when ``record``.
    """
    n = grid.n
    k = len(seeds)
    pos = np.array(seeds, dtype=float).reshape(k, 2)
    start = pos[:, axis].copy()
    alive = np.ones(k, dtype=bool)
    reasons = np.full(k, "max_len", dtype=object)
    wraps = np.zeros(k, dtype=int)
    visited = np.zeros((k, n, n), dtype=bool)
    ci, cj = _cells(grid, pos)
    visited[np.arange(k), ci, cj] = True
    paths = [[p.copy()] for p in pos] if record else None
    solid = grid.solid
    nsteps = int(np.ceil(max_len / step))
    for _ in range(nsteps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        p = pos[idx]
        v1 = direction * interpolate(v, p)
        s1 = np.hypot(v1[:, 0], v1[:, 1])
        ok = s1 >= STAGNATION
        pm = p + 0.5 * step * v1 / np.where(ok, s1, 1.0)[:, None]
        v2 = direction * interpolate(v, pm)
        s2 = np.hypot(v2[:, 0], v2[:, 1])
        ok &= s2 >= STAGNATION
        stag = idx[~ok]
        reasons[stag] = "stagnation"
        alive[stag] = False
        idx, v2, s2, p = idx[ok], v2[ok], s2[ok], p[ok]
        p = p + step * v2 / s2[:, None]
        pos[idx] = p
        ci, cj = _cells(grid, p)
        hit = solid[ci, cj]
        if hit.any():
            reasons[idx[hit]] = "wall"
            alive[idx[hit]] = False
        good = ~hit
        visited[idx[good], ci[good], cj[good]] = True
        if record:
            for t, q in zip(idx[good], p[good]):
                paths[t].append(q.copy())
        disp = p[:, axis] - start[idx]
        done = good & (np.abs(disp) >= 1.0)
        if done.any():
            reasons[idx[done]] = "wrap"
            wraps[idx[done]] = np.sign(disp[done]).astype(int)
            alive[idx[done]] = False
    if record:
        paths = [np.array(pp) for pp in paths]
    return reasons, wraps, visited, paths


def trace_streamline(grid: UnitCellGrid, v: CellVelocity, seed, max_len: float = 50.0,
                     step: float | None = None, axis: int = 1, direction: int = 1) -> Streamline:
    """Trace one streamline from ``seed``.

    Stops after one full periodic traverse along ``axis`` (1 = x, 2 = y),
    at |v| < 1e-12, on entering solid, or after ``max_len`` arc length.
    """
    seed = np.asarray(seed, dtype=float)
    i, j = _cells(grid, seed[None, :])
    if grid.solid[i[0], j[0]]:
        raise ValueError(f"seed {tuple(seed)} lies in the solid")
    step = step if step is not None else 0.5 * grid.h
    reasons, wraps, _, paths = _trace_many(
        grid, v, seed[None, :], direction, axis - 1, step, max_len, record=True
    )
    return Streamline(paths[0], str(reasons[0]), int(wraps[0]))


def boundary_seeds(grid: UnitCellGrid, axis: int) -> np.ndarray:
    """Face centers of the active boundary faces normal to ``axis``."""
    h = grid.h
    if axis == 1:
        js = np.flatnonzero(grid.xface_active()[0, :])
        return np.column_stack([np.zeros(js.size), (js + 0.5) * h])
    is_ = np.flatnonzero(grid.yface_active()[:, 0])
    return np.column_stack([(is_ + 0.5) * h, np.zeros(is_.size)])


def _fill_single_gaps(mask, fluid):
    """Mark unvisited fluid cells squeezed between two marked cells along an axis.

    Seeds are one cell apart, so where the flow widens neighbouring traces
    can straddle a cell without sampling it.
    """
    out = mask.copy()
    for ax in (0, 1):
        out |= fluid & np.roll(mask, 1, axis=ax) & np.roll(mask, -1, axis=ax)
    return out


def net_flow_mask(grid: UnitCellGrid, v: CellVelocity, j: int,
                  step: float | None = None, max_len: float = 50.0) -> NetFlowMask:
    """Cells crossed by streamlines that wrap once around axis ``j``.

    Single-cell gaps between marked cells are closed afterwards.
    """
    step = step if step is not None else 0.5 * grid.h
    seeds = boundary_seeds(grid, j)
    mask = np.zeros((grid.n, grid.n), dtype=bool)
    if len(seeds) == 0:
        return NetFlowMask(mask, j)
    for direction in (1, -1):
        reasons, _, visited, _ = _trace_many(grid, v, seeds, direction, j - 1, step, max_len)
        wrapped = reasons == "wrap"
        if wrapped.any():
            mask |= visited[wrapped].any(axis=0)
    return NetFlowMask(_fill_single_gaps(mask & grid.fluid, grid.fluid), j)
