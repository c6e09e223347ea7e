"""Allen-Cahn phase field on the pore space of a unit cell.

The relaxation solves, per pseudo-time step, the backward-Euler system

    (u - u_old)/dt + div(v u) = S xi lap(u) - (S/xi) P'(u)
                                + (S/xi) mean_P(P'(u))
                                - c delta(u) (mean_P(u) - s_target)

with the contact-angle flux on fluid-solid faces and periodicity on the
cell boundary.  The two nonlocal terms are rank-one in the Jacobian and are
handled exactly with a Woodbury correction on top of the sparse part.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import expit

from .geometry import UnitCellGrid, periodic_delta


class RelaxationError(RuntimeError):
    """Relaxation did not reach a steady state (or Newton failed)."""

    def __init__(self, message: str, report: "RelaxReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True, eq=False)
class PhaseField:
    """Cell-centered phase field; entries on solid cells are 0 and unused."""

    grid: UnitCellGrid
    values: np.ndarray
    xi: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"phase field shape {v.shape} != grid shape")
        v[self.grid.solid] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def fluid_values(self) -> np.ndarray:
        return self.values[self.grid.fluid]

    @classmethod
    def constant(cls, grid: UnitCellGrid, value: float, xi: float) -> "PhaseField":
        return cls(grid, np.full((grid.n, grid.n), float(value)), xi)


@dataclass(frozen=True)
class PhaseFieldParams:
    S: float = 1.0
    xi: float = 0.05
    theta_eq: float = math.pi / 2
    dt: Optional[float] = None
    sat_penalty: float = 1.0
    max_steps: int = 50
    steady_tol: float = 1e-8
    conservative: bool = True
    saturation_forcing: bool = True
    div_tol: float = 1e-8
    newton_tol: float = 1e-12
    newton_maxiter: int = 25

    def __post_init__(self):
        if self.S <= 0 or self.xi <= 0:
            raise ValueError("S and xi must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 < self.theta_eq < math.pi:
            raise ValueError("theta_eq must lie in (0, pi)")

    @property
    def step(self) -> float:
        return self.dt if self.dt is not None else self.xi ** 2 / (4.0 * self.S)


@dataclass
class RelaxReport:
    steps: int = 0
    steady: bool = False
    update_norms: list = field(default_factory=list)
    newton_iterations: list = field(default_factory=list)
    saturations: list = field(default_factory=list)
    integrals: list = field(default_factory=list)


def double_well(u):
    """P(u) = 8 u^2 (1-u)^2 and its first two derivatives."""
    u = np.asarray(u, dtype=float) if not np.iscomplexobj(u) else u
    P = 8.0 * u ** 2 * (1.0 - u) ** 2
    dP = 16.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
    d2P = 16.0 * (1.0 - 6.0 * u + 6.0 * u ** 2)
    return P, dP, d2P


def sqrt_2p(u):
    """sqrt(2 P(u)) = 4 |u (1-u)|, sign taken from the real part (complex-step safe)."""
    s = u * (1.0 - u)
    return 4.0 * s * np.sign(np.real(s))


def d_sqrt_2p(u):
    s = u * (1.0 - u)
    return 4.0 * (1.0 - 2.0 * u) * np.sign(np.real(s))


def equilibrium_profile_1d(z, xi):
    """Flat equilibrium profile 1/2 (1 + tanh(2 z / xi))."""
    return 0.5 * (1.0 + np.tanh(2.0 * np.asarray(z, dtype=float) / xi))


def initial_droplet(grid: UnitCellGrid, center, radius: float, xi: float) -> PhaseField:
    """Logistic droplet u = 1/(1 + exp(5 r / xi)), r = periodic distance - radius."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    x, y = grid.cell_centers()
    dist = np.hypot(periodic_delta(x, center[0]), periodic_delta(y, center[1]))
    return PhaseField(grid, expit(-5.0 * (dist - radius) / xi), xi)


def initial_stripe(grid: UnitCellGrid, lo: float, hi: float, xi: float, axis: int = 0) -> PhaseField:
    """Band lo < x_axis < hi of fluid 1 with logistic edges (periodic)."""
    coords = grid.cell_centers()[axis]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    dist = np.abs(periodic_delta(coords, mid)) - half
    return PhaseField(grid, expit(-5.0 * dist / xi), xi)


def saturation(grid: UnitCellGrid, u) -> float:
    """Mean of u over the pore space."""
    vals = u.values if isinstance(u, PhaseField) else np.asarray(u)
    return float(vals[grid.fluid].mean())


def interfacial_area(grid: UnitCellGrid, u, xi: Optional[float] = None) -> float:
    """Mean over the pore space of (4/xi) u (1-u)."""
    if isinstance(u, PhaseField):
        xi = u.xi if xi is None else xi
        vals = u.values
    else:
        vals = np.asarray(u)
    if xi is None:
        raise ValueError("xi required for a raw array")
    f = vals[grid.fluid]
    return float(np.mean(4.0 / xi * f * (1.0 - f)))


class CellOperators:
    """Sparse cell-centered operators on the fluid cells of a grid."""

    def __init__(self, grid: UnitCellGrid):
        self.grid = grid
        n, h = grid.n, grid.h
        fluid = grid.fluid
        self.dof = -np.ones((n, n), dtype=int)
        self.dof[fluid] = np.arange(grid.n_fluid)
        self.N = grid.n_fluid

        rows, cols, vals = [], [], []
        wall_count = np.zeros((n, n))
        for axis in (0, 1):
            for shift in (1, -1):
                nb_fluid = np.roll(fluid, shift, axis=axis)
                nb_dof = np.roll(self.dof, shift, axis=axis)
                both = fluid & nb_fluid
                rows.append(self.dof[both])
                cols.append(nb_dof[both])
                vals.append(np.full(both.sum(), 1.0 / h ** 2))
                rows.append(self.dof[both])
                cols.append(self.dof[both])
                vals.append(np.full(both.sum(), -1.0 / h ** 2))
                wall_count += fluid & ~nb_fluid
        self.laplacian = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.N, self.N),
        )
        # wall faces per fluid cell, divided by h: multiplies the normal flux
        self.wall_weight = wall_count[fluid] / h

    def to_vec(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values)[self.grid.fluid].astype(float)

    def to_field(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros((self.grid.n, self.grid.n))
        out[self.grid.fluid] = vec
        return out

    def advection(self, wx: np.ndarray, wy: np.ndarray) -> sp.csr_matrix:
        """First-order upwind div(v u) on fluid cells from face velocities."""
        g, h = self.grid, self.grid.h
        rows, cols, vals = [], [], []
        for axis, w, active in ((0, wx, g.xface_active()), (1, wy, g.yface_active())):
            # face (i,j) sits between cell (i,j) and its minus neighbour
            right = self.dof
            left = np.roll(self.dof, 1, axis=axis)
            sel = active
            wf = w[sel]
            up = np.where(wf > 0, left[sel], right[sel])
            # flux leaves `left` and enters `right`
            rows += [left[sel], right[sel]]
            cols += [up, up]
            vals += [wf / h, -wf / h]
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.N, self.N),
        )


def face_divergence(grid: UnitCellGrid, wx: np.ndarray, wy: np.ndarray, weight=None) -> np.ndarray:
    """Discrete div(weight * w) per cell (solid cells report 0).

    ``weight`` is an optional cell-centered field averaged arithmetically
    onto faces (used for the density-weighted mass balance).
    """
    if weight is None:
        fx, fy = wx, wy
    else:
        fx = wx * 0.5 * (weight + np.roll(weight, 1, axis=0))
        fy = wy * 0.5 * (weight + np.roll(weight, 1, axis=1))
    div = (np.roll(fx, -1, axis=0) - fx + np.roll(fy, -1, axis=1) - fy) / grid.h
    div[grid.solid] = 0.0
    return div


def relax_with_report(
    grid: UnitCellGrid,
    u_init: PhaseField,
    params: PhaseFieldParams,
    s_target: Optional[float] = None,
    velocity=None,
    strict: bool = False,
) -> tuple[PhaseField, RelaxReport]:
    """Pseudo-time relaxation of the cell phase-field problem.

    Stops when ``max|du|/dt <= steady_tol`` or after ``max_steps``.  With
    ``strict=True`` running out of steps raises :class:`RelaxationError`.
    Newton failure always raises.
    """
    if u_init.grid is not grid and u_init.grid.cache_key() != grid.cache_key():
        raise ValueError("phase field lives on a different grid")
    if s_target is None:
        s_target = saturation(grid, u_init)
    if not 0.0 <= s_target <= 1.0:
        raise ValueError("s_target must lie in [0, 1]")
    xi, S = params.xi, params.S
    if xi < 4 * grid.h:
        warnings.warn(
            f"interface width xi={xi} resolved by fewer than 4 cells (h={grid.h})",
            stacklevel=2,
        )

    ops = CellOperators(grid)
    N = ops.N
    adv = None
    if velocity is not None:
        wx, wy = velocity.wx, velocity.wy
        div = face_divergence(grid, wx, wy)
        if np.abs(div).max() > params.div_tol:
            raise ValueError(
                f"advecting velocity has divergence {np.abs(div).max():.3e} > {params.div_tol}"
            )
        adv = ops.advection(wx, wy)

    dt = params.step
    cos_t = math.cos(params.theta_eq)
    if abs(cos_t) < 1e-15:
        cos_t = 0.0
    c = params.sat_penalty if params.saturation_forcing else 0.0
    ww = ops.wall_weight

    base = sp.identity(N, format="csr") / dt - S * xi * ops.laplacian
    if adv is not None:
        base = base + adv

    def residual(u, u_old):
        _, dP, _ = double_well(u)
        r = (u - u_old) / dt - S * xi * (ops.laplacian @ u) + (S / xi) * dP
        if adv is not None:
            r += adv @ u
        if cos_t:
            r -= S * xi * ww * (cos_t / xi) * sqrt_2p(u)
        if params.conservative:
            r -= (S / xi) * dP.mean()
        if c:
            r += c * (4.0 / xi) * u * (1 - u) * (u.mean() - s_target)
        return r

    def jacobian_diag(u):
        _, _, d2P = double_well(u)
        diag = (S / xi) * d2P
        if cos_t:
            diag = diag - S * xi * ww * (cos_t / xi) * d_sqrt_2p(u)
        if c:
            diag = diag + c * (4.0 / xi) * (1 - 2 * u) * (u.mean() - s_target)
        return diag, d2P

    lu_cache = {}

    def factor(u):
        diag, _ = jacobian_diag(u)
        J = (base + sp.diags(diag)).tocsc()
        lu_cache["lu"] = spla.splu(J, permc_spec="MMD_AT_PLUS_A")

    def correction(u, r):
        lu = lu_cache["lu"]
        _, _, d2P = double_well(u)
        a_cols, b_cols = [], []
        if params.conservative:
            a_cols.append(np.full(N, -S / xi))
            b_cols.append(d2P / N)
        if c:
            a_cols.append(c * (4.0 / xi) * u * (1 - u))
            b_cols.append(np.full(N, 1.0 / N))
        y = lu.solve(r)
        if a_cols:
            A = np.column_stack(a_cols)
            B = np.column_stack(b_cols)
            Z = lu.solve(A)
            small = np.eye(A.shape[1]) + B.T @ Z
            y = y - Z @ np.linalg.solve(small, B.T @ y)
        return y

    def solve_step(u, u_old):
        # chord iterations on a cached factorization, refreshed when the
        # contraction degrades
        prev = None
        fresh = "lu" not in lu_cache
        if fresh:
            factor(u)
        for its in range(1, params.newton_maxiter + 1):
            du = correction(u, residual(u, u_old))
            u = u - du
            norm = np.abs(du).max()
            if norm <= params.newton_tol * max(1.0, np.abs(u).max()):
                return u, its
            if prev is not None and norm > 0.2 * prev and not fresh:
                factor(u)
                fresh = True
                prev = None
                continue
            fresh = False
            prev = norm
        raise RelaxationError("Newton did not converge", report)

    report = RelaxReport()
    u = ops.to_vec(u_init.values)
    report.saturations.append(float(u.mean()))
    report.integrals.append(float(u.sum() * grid.cell_volume))
    for step in range(params.max_steps):
        u_old = u.copy()
        u, its = solve_step(u, u_old)
        upd = float(np.abs(u - u_old).max() / dt)
        report.steps = step + 1
        report.update_norms.append(upd)
        report.newton_iterations.append(its)
        report.saturations.append(float(u.mean()))
        report.integrals.append(float(u.sum() * grid.cell_volume))
        if upd <= params.steady_tol:
            report.steady = True
            break
    if strict and not report.steady:
        raise RelaxationError(
            f"no steady state after {params.max_steps} steps "
            f"(last update {report.update_norms[-1]:.3e})",
            report,
        )
    return PhaseField(grid, ops.to_field(u), xi), report


def relax(grid, u_init, params, s_target=None, velocity=None, strict=False) -> PhaseField:
    """Relax ``u_init``; see :func:`relax_with_report`."""
    return relax_with_report(grid, u_init, params, s_target, velocity, strict)[0]


def boundary_flux(grid: UnitCellGrid, u: PhaseField, theta_eq: float) -> np.ndarray:
    """Outward normal derivative imposed on each wall-adjacent fluid cell.

    The contact angle is measured through fluid 1, so with the outward
    normal n pointing into the solid, d_n u = cos(theta)/xi * sqrt(2 P(u)).
    """
    cos_t = math.cos(theta_eq)
    if abs(cos_t) < 1e-15:
        cos_t = 0.0
    flux = cos_t / u.xi * sqrt_2p(u.values)
    flux[grid.solid] = 0.0
    return flux
