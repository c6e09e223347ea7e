"""Periodic unit-cell grids with rasterized solid obstacles.

The reference cell Y = [0, 1]^2 is split into ``n x n`` square cells of
width ``h = 1/n``.  Arrays are indexed ``[i, j]`` with ``i`` along x and
``j`` along y; cell ``(i, j)`` has its center at ``((i + 1/2) h, (j + 1/2) h)``.
A cell is solid iff its center lies inside the obstacle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy import ndimage


class GeometryError(ValueError):
    """Raised for unusable geometry parameters or mask files."""


@dataclass(frozen=True)
class Obstacle:
    """Centered square solid of the given side length."""

    side: float
    name = "obstacle"


@dataclass(frozen=True)
class Cross:
    """Centered cross of two fluid channels of the given width."""

    width: float
    name = "cross"


@dataclass(frozen=True)
class Channel:
    """Horizontal fluid channel of the given height, walls above and below."""

    height: float
    name = "channel"


@dataclass(frozen=True)
class MaskFile:
    """0/1 text mask, 1 = solid (see :func:`read_mask_file`)."""

    path: str
    name = "maskfile"


@dataclass(frozen=True)
class Empty:
    """No solid at all."""

    name = "empty"


GeometryKind = Union[Obstacle, Cross, Channel, MaskFile, Empty]


@dataclass(frozen=True, eq=False)
class UnitCellGrid:
    """Periodic Cartesian grid over Y with a solid mask.

    Face conventions used throughout the package: the x-face ``(i, j)`` is
    the left face of cell ``(i, j)`` (between cells ``i-1`` and ``i``,
    periodic), the y-face ``(i, j)`` is the bottom face of cell ``(i, j)``.
    """

    n: int
    solid: np.ndarray
    kind: GeometryKind = field(default_factory=Empty)
    dim: int = 2

    def __post_init__(self):
        solid = np.asarray(self.solid, dtype=bool)
        if solid.shape != (self.n, self.n):
            raise GeometryError(f"mask shape {solid.shape} does not match n={self.n}")
        solid = solid.copy()
        solid.setflags(write=False)
        object.__setattr__(self, "solid", solid)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def fluid(self) -> np.ndarray:
        return ~self.solid

    @property
    def n_fluid(self) -> int:
        return int(self.fluid.sum())

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def pore_volume(self) -> float:
        """|P|, equal to the porosity since |Y| = 1."""
        return self.n_fluid * self.cell_volume

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        c = (np.arange(self.n) + 0.5) * self.h
        return np.meshgrid(c, c, indexing="ij")

    def xface_active(self) -> np.ndarray:
        """x-faces with fluid on both sides."""
        f = self.fluid
        return f & np.roll(f, 1, axis=0)

    def yface_active(self) -> np.ndarray:
        f = self.fluid
        return f & np.roll(f, 1, axis=1)

    def xface_wall(self) -> np.ndarray:
        """x-faces on the fluid-solid interface Gamma."""
        f = self.fluid
        return f ^ np.roll(f, 1, axis=0)

    def yface_wall(self) -> np.ndarray:
        f = self.fluid
        return f ^ np.roll(f, 1, axis=1)

    def components(self) -> tuple[np.ndarray, int]:
        """Label periodically connected fluid components (label 0 = solid)."""
        return _periodic_label(self.fluid)

    @property
    def label(self) -> str:
        k = self.kind
        if isinstance(k, Obstacle):
            return f"obstacle({k.side:g})"
        if isinstance(k, Cross):
            return f"cross({k.width:g})"
        if isinstance(k, Channel):
            return f"channel({k.height:g})"
        if isinstance(k, MaskFile):
            return f"mask({Path(k.path).name})"
        return "empty"

    def cache_key(self) -> tuple:
        return (self.n, self.solid.tobytes())


def _periodic_label(mask: np.ndarray) -> tuple[np.ndarray, int]:
    labels, count = ndimage.label(mask)
    if count == 0:
        return labels, 0
    parent = list(range(count + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a_edge, b_edge in ((labels[0, :], labels[-1, :]), (labels[:, 0], labels[:, -1])):
        for a, b in zip(a_edge, b_edge):
            if a and b:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(count + 1)])
    uniq = np.unique(roots[1:])
    remap = np.zeros(count + 1, dtype=int)
    remap[1:] = np.searchsorted(uniq, roots[1:]) + 1
    return remap[labels], len(uniq)


def _snap(value: float, n: int, what: str) -> int:
    if not 0.0 < value < 1.0:
        raise GeometryError(f"{what} must lie in (0, 1), got {value}")
    return int(round(value * n))


def _centered_band(k: int, n: int) -> np.ndarray:
    start = (n - k) // 2
    band = np.zeros(n, dtype=bool)
    band[start:start + k] = True
    return band


def read_mask_file(path: str | Path) -> np.ndarray:
    """Read a 0/1 mask.

    First line ``n_x n_y``; then ``n_y`` rows, row ``j`` (from y = 0 upward)
    holding ``n_x`` entries, either whitespace separated or contiguous.
    Returns the solid mask indexed ``[i, j]``.
    """
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise GeometryError(f"{path}: empty mask file")
    try:
        nx, ny = (int(t) for t in lines[0].split())
    except ValueError as exc:
        raise GeometryError(f"{path}: first line must be 'n_x n_y'") from exc
    rows = []
    for ln in lines[1:]:
        tokens = ln.split() if " " in ln or "\t" in ln else list(ln)
        if any(t not in ("0", "1") for t in tokens):
            raise GeometryError(f"{path}: entries must be 0 or 1")
        rows.append([t == "1" for t in tokens])
    if len(rows) != ny or any(len(r) != nx for r in rows):
        raise GeometryError(f"{path}: expected {ny} rows of {nx} entries")
    return np.array(rows, dtype=bool).T


def write_mask_file(path: str | Path, grid: UnitCellGrid) -> None:
    rows = [f"{grid.n} {grid.n}"]
    for j in range(grid.n):
        rows.append("".join("1" if s else "0" for s in grid.solid[:, j]))
    Path(path).write_text("\n".join(rows) + "\n")


def build_unit_cell(kind: GeometryKind, n: int) -> UnitCellGrid:
    """Rasterize ``kind`` on an ``n x n`` periodic grid.

    Geometry parameters are snapped to the nearest whole number of cells
    and the solid is centered in Y, so porosities are exact whenever
    ``parameter * n`` is an integer (e.g. Obstacle(0.45) for n a multiple
    of 20, Cross(0.3) for n a multiple of 10).
    """
    if n < 8:
        raise GeometryError(f"resolution n={n} too coarse, need n >= 8")

    if isinstance(kind, Empty):
        solid = np.zeros((n, n), dtype=bool)
    elif isinstance(kind, Obstacle):
        k = _snap(kind.side, n, "obstacle side")
        if k < 2:
            raise GeometryError(f"obstacle of side {kind.side} is under 2 cells at n={n}")
        if n - k < 2:
            raise GeometryError("obstacle leaves less than 2 fluid cells per axis")
        band = _centered_band(k, n)
        solid = band[:, None] & band[None, :]
    elif isinstance(kind, Cross):
        k = _snap(kind.width, n, "cross width")
        if k < 2:
            raise GeometryError(f"cross channel of width {kind.width} is under 2 cells at n={n}")
        band = _centered_band(k, n)
        solid = ~(band[:, None] | band[None, :])
    elif isinstance(kind, Channel):
        k = _snap(kind.height, n, "channel height")
        if k < 2:
            raise GeometryError(f"channel of height {kind.height} is under 2 cells at n={n}")
        band = _centered_band(k, n)
        solid = np.broadcast_to(~band[None, :], (n, n)).copy()
    elif isinstance(kind, MaskFile):
        solid = read_mask_file(kind.path)
        if solid.shape != (n, n):
            raise GeometryError(
                f"mask file {kind.path} has shape {solid.shape}, expected ({n}, {n})"
            )
    else:
        raise GeometryError(f"unknown geometry kind {kind!r}")

    grid = UnitCellGrid(n=n, solid=solid, kind=kind)
    _validate(grid)
    return grid


def _validate(grid: UnitCellGrid) -> None:
    fluid = grid.fluid
    if not fluid.any():
        raise GeometryError("geometry has no fluid cells")
    neighbours = sum(
        np.roll(fluid, s, axis=a) for a in (0, 1) for s in (1, -1)
    )
    isolated = fluid & (neighbours == 0)
    if isolated.any() and grid.n_fluid > 1:
        i, j = np.argwhere(isolated)[0]
        raise GeometryError(f"isolated fluid cell at ({i}, {j})")


def porosity(grid: UnitCellGrid) -> float:
    """Fluid-cell fraction of the unit cell."""
    return grid.n_fluid / grid.n ** grid.dim


def periodic_delta(a: np.ndarray, b: float) -> np.ndarray:
    """Signed minimum-image difference ``a - b`` on the unit torus."""
    d = np.asarray(a) - b
    return d - np.round(d)
