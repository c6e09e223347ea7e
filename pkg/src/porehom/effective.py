"""Effective Darcy-scale parameters from cell solutions.

    K^(k)_ij = (1/|P|) int u^(k) (w_j)_i,      M^(k)_i = (1/|P|) int u^(k) (w_0)_i,

with u^(1) = u and u^(2) = 1 - u.  Integrals are midpoint sums over fluid
cells with face velocities averaged to cell centers.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .geometry import UnitCellGrid
from .phasefield import PhaseField, interfacial_area, saturation
from .stokescell import CellSolution, FluidParams, solve_all, CellProblemSolver

CSV_HEADER = [
    "s1", "Krel1_xx", "Krel1_yy", "Krel2_xx", "Krel2_yy",
    "M1_x", "M1_y", "M2_x", "M2_y", "area", "phi", "geometry", "M", "R",
]


class AnisotropyError(ValueError):
    """kappa_abs is not a multiple of the identity within the isotropy tolerance."""


@dataclass
class EffectiveParameters:
    K1: np.ndarray
    K2: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    s1: float
    area: float
    porosity: float
    filtered: bool = False
    K1_raw: Optional[np.ndarray] = None  # unmasked, kept when filtered
    K2_raw: Optional[np.ndarray] = None


@dataclass
class RelPermRecord:
    s1: float
    K_rel1: np.ndarray
    K_rel2: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    area: float
    phi: float
    geometry: str
    M: float
    R: float
    droplet: dict = field(default_factory=dict)
    K_rel1_raw: Optional[np.ndarray] = None
    K_rel2_raw: Optional[np.ndarray] = None

    def row(self) -> list:
        return [
            self.s1, self.K_rel1[0, 0], self.K_rel1[1, 1],
            self.K_rel2[0, 0], self.K_rel2[1, 1],
            self.M1[0], self.M1[1], self.M2[0], self.M2[1],
            self.area, self.phi, self.geometry, self.M, self.R,
        ]


@dataclass
class AbsolutePermeability:
    tensor: np.ndarray
    rel_tol: float = 0.01

    @property
    def isotropic(self) -> bool:
        k = self.tensor
        scale = 0.5 * abs(k[0, 0] + k[1, 1])
        if scale == 0:
            return False
        off = max(abs(k[0, 1]), abs(k[1, 0]))
        return abs(k[0, 0] - k[1, 1]) <= self.rel_tol * scale and off <= self.rel_tol * scale

    @property
    def scalar(self) -> Optional[float]:
        return float(0.5 * (self.tensor[0, 0] + self.tensor[1, 1])) if self.isotropic else None


def _mask_array(grid, mask):
    if mask is None:
        return grid.fluid
    m = getattr(mask, "cells", mask)
    m = np.asarray(m, dtype=bool)
    if m.shape != (grid.n, grid.n):
        raise ValueError("mask shape does not match grid")
    return m & grid.fluid


def _check_grid(grid, *objs):
    for o in objs:
        g = getattr(o, "grid", None)
        if g is None and hasattr(o, "w"):
            g = o.w.grid
        if g is not None and g is not grid and g.cache_key() != grid.cache_key():
            raise ValueError("cell solution and phase field live on different grids")


def _weights(u):
    vals = u.values if isinstance(u, PhaseField) else np.asarray(u, dtype=float)
    return vals, 1.0 - vals


def mobility_tensors(grid: UnitCellGrid, u, solutions: Sequence[CellSolution], masks=None):
    """(K1, K2) from the d pressure-driven solutions.

    ``masks`` is None or a sequence with one entry (NetFlowMask, boolean
    array or None) per driver; column j is integrated over mask j only.
    """
    if len(solutions) != grid.dim:
        raise ValueError(f"need {grid.dim} pressure-driven solutions")
    _check_grid(grid, u, *solutions)
    w1, w2 = _weights(u)
    vol = grid.cell_volume / grid.pore_volume
    K1 = np.zeros((grid.dim, grid.dim))
    K2 = np.zeros_like(K1)
    for j, sol in enumerate(solutions):
        if sol.driver not in (-1, j + 1):
            raise ValueError(f"solution {j} has driver {sol.driver}, expected {j + 1}")
        m = _mask_array(grid, None if masks is None else masks[j])
        comps = sol.w.centers()
        for i in range(grid.dim):
            c = comps[i]
            K1[i, j] = vol * np.sum((w1 * c)[m])
            K2[i, j] = vol * np.sum((w2 * c)[m])
    return K1, K2


def surface_tension_vectors(grid: UnitCellGrid, u, w0_solution: CellSolution):
    """(M1, M2) from the surface-tension solution (never filtered)."""
    _check_grid(grid, u, w0_solution)
    w1, w2 = _weights(u)
    vol = grid.cell_volume / grid.pore_volume
    comps = w0_solution.w.centers()
    fl = grid.fluid
    M1 = np.array([vol * np.sum((w1 * c)[fl]) for c in comps])
    M2 = np.array([vol * np.sum((w2 * c)[fl]) for c in comps])
    return M1, M2


_KABS_CACHE: dict = {}


def absolute_permeability(grid: UnitCellGrid, params: Optional[FluidParams] = None,
                          filtered: bool = False, cache: bool = True) -> AbsolutePermeability:
    """Single-phase mobility tensor phi^-1 int w_{j,i} (u = 0, M = R = 1).

    With ``filtered`` each column is integrated over the net-flow mask of
    its own driver, matching filtered two-phase mobilities for M = R = 1.
    """
    params = (params or FluidParams()).single_phase()
    key = (grid.cache_key(), params.Re, params.Eu_bar, params.slip_length, filtered)
    if cache and key in _KABS_CACHE:
        return AbsolutePermeability(_KABS_CACHE[key].copy())
    u0 = PhaseField(grid, np.zeros((grid.n, grid.n)), params.xi or 0.05)
    solver = CellProblemSolver(grid, u0, params)
    sols = [solver.pressure_driven(j) for j in (1, 2)]
    masks = None
    if filtered:
        from .streamflow import net_flow_mask

        masks = [net_flow_mask(grid, s.w, j + 1) for j, s in enumerate(sols)]
    K1, K2 = mobility_tensors(grid, u0, sols, masks)
    tensor = K1 + K2
    if cache:
        _KABS_CACHE[key] = tensor.copy()
    return AbsolutePermeability(tensor)


def clear_cache() -> None:
    _KABS_CACHE.clear()


def relative_permeability(K_k: np.ndarray, kappa_abs, mu_k: float) -> np.ndarray:
    """mu_k K_k / kappa_abs; refuses an anisotropic kappa_abs."""
    if isinstance(kappa_abs, AbsolutePermeability):
        if not kappa_abs.isotropic:
            raise AnisotropyError(
                f"kappa_abs is anisotropic: {kappa_abs.tensor.tolist()}; report raw mobilities instead"
            )
        kappa_abs = kappa_abs.scalar
    elif np.ndim(kappa_abs) == 2:
        return relative_permeability(K_k, AbsolutePermeability(np.asarray(kappa_abs)), mu_k)
    if not kappa_abs > 0:
        raise ValueError("kappa_abs must be positive")
    return mu_k * np.asarray(K_k) / float(kappa_abs)


def darcy_velocity(K_k, M_k, grad_p) -> np.ndarray:
    """Phase velocity -K grad p - M."""
    return -np.asarray(K_k) @ np.asarray(grad_p, dtype=float) - np.asarray(M_k)


def effective_parameters(grid: UnitCellGrid, u: PhaseField, params: FluidParams,
                         filtered: bool = False, return_solutions: bool = False):
    """Solve all cell problems for ``u`` and integrate them."""
    sols, s0 = solve_all(grid, u, params)
    masks = None
    if filtered:
        from .streamflow import net_flow_mask

        masks = [net_flow_mask(grid, s.w, j + 1) for j, s in enumerate(sols)]
    K1, K2 = mobility_tensors(grid, u, sols, masks)
    M1, M2 = surface_tension_vectors(grid, u, s0)
    eff = EffectiveParameters(
        K1, K2, M1, M2,
        s1=saturation(grid, u), area=interfacial_area(grid, u),
        porosity=grid.pore_volume, filtered=filtered,
    )
    if filtered:
        eff.K1_raw, eff.K2_raw = mobility_tensors(grid, u, sols)
    if return_solutions:
        return eff, sols, s0, masks
    return eff


def relperm_record(eff: EffectiveParameters, kappa_abs, params: FluidParams,
                   geometry: str, droplet: Optional[dict] = None,
                   kappa_abs_raw=None) -> RelPermRecord:
    """Normalize mobilities; unmasked diagnostics use ``kappa_abs_raw``."""
    raw1 = raw2 = None
    if eff.K1_raw is not None and kappa_abs_raw is not None:
        raw1 = relative_permeability(eff.K1_raw, kappa_abs_raw, params.M)
        raw2 = relative_permeability(eff.K2_raw, kappa_abs_raw, 1.0)
    return RelPermRecord(
        s1=eff.s1,
        K_rel1=relative_permeability(eff.K1, kappa_abs, params.M),
        K_rel2=relative_permeability(eff.K2, kappa_abs, 1.0),
        M1=eff.M1, M2=eff.M2, area=eff.area, phi=eff.porosity,
        geometry=geometry, M=params.M, R=params.R, droplet=dict(droplet or {}),
        K_rel1_raw=raw1, K_rel2_raw=raw2,
    )


def write_relperm_csv(path, records: Sequence[RelPermRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in records:
            wr.writerow([_fmt(v) for v in r.row()])


def read_relperm_csv(path) -> list[dict]:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh, skipinitialspace=True))
    out = []
    for row in rows:
        out.append({k.strip(): (v if k.strip() == "geometry" else float(v)) for k, v in row.items()})
    return out


def _fmt(v):
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isfinite(v):
        return repr(v)
    return str(v)
