"""Staggered finite-volume solvers for the velocity cell problems.

For a frozen phase field u the d pressure-driven problems and the
surface-tension problem share one linear operator,

    -(1/Re) div( mu(u) (2 eps(w) - 2/3 div(w) I) ) - Eu_bar grad(Pi) = f,
    div( rho(u) w ) = 0,   Y-periodic,   mean_P(Pi) = 0,

with ``f = Eu_bar e_j`` for driver ``j`` and
``f = (1/Ca)(3 xi/2) div(grad u (x) grad u)`` for the surface-tension
driver 0.  This orientation makes ``v_0 = -sum_j w_j d_j p_0 - w_0`` hold
with ``w_j`` pointing along ``e_j``.

Velocities live on faces (x-components on the left face of each cell,
y-components on the bottom face), pressure at cell centers.  Fluid-solid
faces carry zero normal velocity; tangential wall conditions are Navier
slip with slip length ``lambda`` (no-slip for 0) through half-cell ghosts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import UnitCellGrid
from .phasefield import PhaseField, sqrt_2p


class CellSolverError(RuntimeError):
    """Singular or inaccurate cell-problem solve."""


@dataclass(frozen=True)
class FluidParams:
    """Nondimensional fluid parameters (reference fluid: fluid 2)."""

    M: float = 1.0
    R: float = 1.0
    Ca: float = 1.0
    Re: float = 1.0
    Eu_bar: float = 1.0
    xi: Optional[float] = None
    slip_length: float = 0.0
    theta_eq: float = math.pi / 2
    S: float = 1.0
    Fr: float = 1.0

    def __post_init__(self):
        for name in ("M", "R", "Ca", "Re", "Eu_bar", "S", "Fr"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.slip_length < 0:
            raise ValueError("slip length must be non-negative")
        if self.xi is not None and self.xi <= 0:
            raise ValueError("xi must be positive")

    def mu(self, u):
        return 1.0 + u * (self.M - 1.0)

    def rho(self, u):
        return 1.0 + u * (self.R - 1.0)

    def single_phase(self) -> "FluidParams":
        return replace(self, M=1.0, R=1.0)


@dataclass(frozen=True, eq=False)
class CellVelocity:
    """Face-normal velocity components on the staggered grid."""

    grid: UnitCellGrid
    wx: np.ndarray
    wy: np.ndarray

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Average opposite faces to cell centers (0 in solid)."""
        vx = 0.5 * (self.wx + np.roll(self.wx, -1, axis=0))
        vy = 0.5 * (self.wy + np.roll(self.wy, -1, axis=1))
        vx[self.grid.solid] = 0.0
        vy[self.grid.solid] = 0.0
        return vx, vy

    def divergence(self, rho=None) -> np.ndarray:
        from .phasefield import face_divergence

        return face_divergence(self.grid, self.wx, self.wy, rho)

    def scaled(self, factor: float) -> "CellVelocity":
        return CellVelocity(self.grid, factor * self.wx, factor * self.wy)

    def __add__(self, other: "CellVelocity") -> "CellVelocity":
        return CellVelocity(self.grid, self.wx + other.wx, self.wy + other.wy)

    @classmethod
    def uniform(cls, grid: UnitCellGrid, vx: float, vy: float) -> "CellVelocity":
        wx = np.where(grid.xface_active(), vx, 0.0)
        wy = np.where(grid.yface_active(), vy, 0.0)
        return cls(grid, wx, wy)

    @classmethod
    def zeros(cls, grid: UnitCellGrid) -> "CellVelocity":
        z = np.zeros((grid.n, grid.n))
        return cls(grid, z, z.copy())


@dataclass
class CellSolution:
    w: CellVelocity
    pi: np.ndarray
    driver: int
    residuals: dict = field(default_factory=dict)


def _flat(n):
    return np.arange(n * n).reshape(n, n)


def _op(n, rows, cols, vals):
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * n, n * n),
    )


class CellProblemSolver:
    """Assembles and factorizes the cell operator for one phase field."""

    def __init__(self, grid: UnitCellGrid, u: PhaseField, params: FluidParams):
        if u.grid is not grid and u.grid.cache_key() != grid.cache_key():
            raise ValueError("phase field lives on a different grid")
        if not grid.solid.any():
            raise CellSolverError(
                "periodic cell problem without solid is singular (no wall resistance)"
            )
        self.grid, self.u, self.params = grid, u, params
        self.xi = params.xi if params.xi is not None else u.xi
        self._assemble()
        self._factorize()

    # -- assembly ---------------------------------------------------------
    def _assemble(self):
        g, p = self.grid, self.params
        n, h = g.n, g.h
        lam = p.slip_length
        idx = _flat(n)
        ip1 = np.roll(idx, -1, axis=0)  # (i+1, j)
        im1 = np.roll(idx, 1, axis=0)   # (i-1, j)
        jp1 = np.roll(idx, -1, axis=1)
        jm1 = np.roll(idx, 1, axis=1)
        allk = idx.ravel()

        solid = g.solid
        xa, ya = g.xface_active(), g.yface_active()
        xdeep = solid & np.roll(solid, 1, axis=0)
        ydeep = solid & np.roll(solid, 1, axis=1)

        u = self.u.values
        mu_c = p.mu(u)
        rho_c = p.rho(u)
        fl = g.fluid.astype(float)
        # corner (i,j) touches cells (i-1,j-1), (i,j-1), (i-1,j), (i,j)
        cells4 = [fl, np.roll(fl, 1, 0), np.roll(fl, 1, 1), np.roll(np.roll(fl, 1, 0), 1, 1)]
        mus4 = [mu_c, np.roll(mu_c, 1, 0), np.roll(mu_c, 1, 1), np.roll(np.roll(mu_c, 1, 0), 1, 1)]
        cnt = sum(cells4)
        mu_k = np.where(cnt > 0, sum(c * m for c, m in zip(cells4, mus4)) / np.maximum(cnt, 1), 1.0)

        # d/dx of x-face values to cells, d/dy of y-face values to cells
        Ddx = _op(n, [allk, allk], [ip1.ravel(), allk], [np.full(n * n, 1 / h), np.full(n * n, -1 / h)])
        Ddy = _op(n, [allk, allk], [jp1.ravel(), allk], [np.full(n * n, 1 / h), np.full(n * n, -1 / h)])
        # columns restricted to active faces later; inactive faces are zero

        # d(ux)/dy at corners with wall ghosts
        wall = 1.0 / (lam + 0.5 * h)
        up_a, dn_a = xa, np.roll(xa, 1, axis=1)
        up_deep, dn_deep = xdeep, np.roll(xdeep, 1, axis=1)
        c_up = np.where(up_a, np.where(dn_deep, wall, 1 / h), 0.0)
        c_dn = np.where(dn_a, np.where(up_deep, -wall, -1 / h), 0.0)
        Gy_x = _op(n, [allk, allk], [allk, jm1.ravel()], [c_up.ravel(), c_dn.ravel()])
        # d(uy)/dx at corners
        rt_a, lt_a = ya, np.roll(ya, 1, axis=0)
        rt_deep, lt_deep = ydeep, np.roll(ydeep, 1, axis=0)
        c_rt = np.where(rt_a, np.where(lt_deep, wall, 1 / h), 0.0)
        c_lt = np.where(lt_a, np.where(rt_deep, -wall, -1 / h), 0.0)
        Gx_y = _op(n, [allk, allk], [allk, im1.ravel()], [c_rt.ravel(), c_lt.ravel()])

        ones = np.full(n * n, 1 / h)
        Fx_c = _op(n, [allk, allk], [allk, im1.ravel()], [ones, -ones])   # cells -> x-faces
        Fy_c = _op(n, [allk, allk], [allk, jm1.ravel()], [ones, -ones])   # cells -> y-faces
        Fx_k = _op(n, [allk, allk], [jp1.ravel(), allk], [ones, -ones])   # corners -> x-faces
        Fy_k = _op(n, [allk, allk], [ip1.ravel(), allk], [ones, -ones])   # corners -> y-faces

        Mc = sp.diags(mu_c.ravel())
        Mk = sp.diags(mu_k.ravel())
        s = -1.0 / p.Re
        Axx = s * (Fx_c @ Mc @ (4 / 3 * Ddx) + Fx_k @ Mk @ Gy_x)
        Axy = s * (Fx_c @ Mc @ (-2 / 3 * Ddy) + Fx_k @ Mk @ Gx_y)
        Ayx = s * (Fy_c @ Mc @ (-2 / 3 * Ddx) + Fy_k @ Mk @ Gy_x)
        Ayy = s * (Fy_c @ Mc @ (4 / 3 * Ddy) + Fy_k @ Mk @ Gx_y)

        rho_x = 0.5 * (rho_c + np.roll(rho_c, 1, axis=0))
        rho_y = 0.5 * (rho_c + np.roll(rho_c, 1, axis=1))
        Dmx = Ddx @ sp.diags(rho_x.ravel())
        Dmy = Ddy @ sp.diags(rho_y.ravel())

        xsel = np.flatnonzero(xa.ravel())
        ysel = np.flatnonzero(ya.ravel())
        csel = np.flatnonzero(g.fluid.ravel())
        self._xsel, self._ysel, self._csel = xsel, ysel, csel
        nx_, ny_, nc = len(xsel), len(ysel), len(csel)

        labels, ncomp = g.components()
        comp = labels.ravel()[csel] - 1
        self.ncomp = ncomp
        # Lagrange multipliers: one column per component in the mass rows,
        # one gauge row per component fixing the pressure mean
        Lm = sp.csr_matrix((np.ones(nc), (np.arange(nc), comp)), shape=(nc, ncomp))
        Lg = sp.csr_matrix((np.full(nc, 1.0), (comp, np.arange(nc))), shape=(ncomp, nc))

        E = p.Eu_bar
        A = sp.bmat([
            [Axx[xsel][:, xsel], Axy[xsel][:, ysel]],
            [Ayx[ysel][:, xsel], Ayy[ysel][:, ysel]],
        ])
        B = -E * sp.vstack([Fx_c[xsel][:, csel], Fy_c[ysel][:, csel]])
        D = sp.hstack([Dmx[csel][:, xsel], Dmy[csel][:, ysel]])
        K = sp.bmat([
            [A, B, None],
            [D, None, Lm],
            [None, Lg, None],
        ], format="csc")
        self.K = K
        self.A, self.B, self.D = A.tocsr(), B.tocsr(), D.tocsr()
        self.nx_, self.ny_, self.nc = nx_, ny_, nc
        self.rho_c = rho_c

    def _factorize(self):
        try:
            self._lu = spla.splu(self.K, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise CellSolverError(f"cell operator is singular: {exc}") from exc

    # -- forcing ----------------------------------------------------------
    def surface_forcing(self) -> tuple[np.ndarray, np.ndarray]:
        """(1/Ca)(3 xi/2) div(grad u (x) grad u) on x- and y-faces."""
        g, p = self.grid, self.params
        return surface_tension_forcing(g, self.u.values, self.xi, p.Ca, p.theta_eq)

    # -- solves -----------------------------------------------------------
    def solve(self, fx: np.ndarray, fy: np.ndarray, driver: int = -1) -> CellSolution:
        g = self.grid
        n = g.n
        rhs = np.zeros(self.K.shape[0])
        rhs[: self.nx_] = fx.ravel()[self._xsel]
        rhs[self.nx_: self.nx_ + self.ny_] = fy.ravel()[self._ysel]
        sol = self._lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise CellSolverError("linear solve produced non-finite values")
        nv = self.nx_ + self.ny_
        wvec, pvec = sol[:nv], sol[nv: nv + self.nc]

        # residuals before gauge clean-up
        f = rhs[:nv]
        mom = self.A @ wvec + self.B @ pvec - f
        fnorm = max(np.linalg.norm(f), 1e-300)
        mass = self.D @ wvec

        wx = np.zeros(n * n)
        wy = np.zeros(n * n)
        wx[self._xsel] = wvec[: self.nx_]
        wy[self._ysel] = wvec[self.nx_:]
        pi = np.zeros(n * n)
        pi[self._csel] = pvec
        pi = pi.reshape(n, n)
        labels, _ = g.components()
        for k in range(1, self.ncomp + 1):
            sel = labels == k
            pi[sel] -= pi[sel].mean()

        residuals = {
            "momentum": float(np.linalg.norm(mom) / fnorm) if np.linalg.norm(f) > 0 else float(np.linalg.norm(mom)),
            "mass": float(np.abs(mass).max()) if mass.size else 0.0,
            "pressure_mean": float(abs(pi[g.fluid].mean())),
        }
        return CellSolution(CellVelocity(g, wx.reshape(n, n), wy.reshape(n, n)), pi, driver, residuals)

    def pressure_driven(self, j: int) -> CellSolution:
        """Driver ``j`` in {1, .., d} (1 = x, 2 = y)."""
        if j not in (1, 2):
            raise ValueError("driver axis must be 1 (x) or 2 (y)")
        n = self.grid.n
        E = self.params.Eu_bar
        fx = np.full((n, n), E if j == 1 else 0.0)
        fy = np.full((n, n), E if j == 2 else 0.0)
        return self.solve(fx, fy, driver=j)

    def surface_tension(self) -> CellSolution:
        fx, fy = self.surface_forcing()
        return self.solve(fx, fy, driver=0)

    def momentum_residual(self, sol: CellSolution, fx, fy) -> float:
        """Relative momentum residual of an arbitrary (w, Pi) pair."""
        w = np.concatenate([sol.w.wx.ravel()[self._xsel], sol.w.wy.ravel()[self._ysel]])
        pv = sol.pi.ravel()[self._csel]
        f = np.concatenate([fx.ravel()[self._xsel], fy.ravel()[self._ysel]])
        r = self.A @ w + self.B @ pv - f
        return float(np.linalg.norm(r) / max(np.linalg.norm(f), 1e-300))


def face_gradients(grid: UnitCellGrid, u: np.ndarray, xi: float, theta_eq: float):
    """Normal derivatives of u on every x- and y-face.

    Fluid-fluid faces use the two-point difference, fluid-solid faces the
    contact-angle flux, faces inside the solid are NaN.
    """
    h = grid.h
    fl = grid.fluid
    cos_t = math.cos(theta_eq)
    if abs(cos_t) < 1e-15:
        cos_t = 0.0
    flux = cos_t / xi * sqrt_2p(u)  # outward normal derivative at walls
    out = []
    for axis in (0, 1):
        left = np.roll(u, 1, axis=axis)
        fl_left = np.roll(fl, 1, axis=axis)
        flux_left = np.roll(flux, 1, axis=axis)
        g = np.full(u.shape, np.nan, dtype=np.result_type(u, float))
        both = fl & fl_left
        g[both] = ((u - left) / h)[both]
        # solid on the plus side: outward normal is +axis for the left cell
        only_left = fl_left & ~fl
        g[only_left] = flux_left[only_left]
        only_right = fl & ~fl_left
        g[only_right] = -flux[only_right]
        out.append(g)
    return out[0], out[1]


def _nanmean2(a, b):
    fa, fb = np.isfinite(np.real(a)), np.isfinite(np.real(b))
    num = np.where(fa, a, 0.0) + np.where(fb, b, 0.0)
    cnt = fa.astype(int) + fb.astype(int)
    return np.where(cnt > 0, num / np.maximum(cnt, 1), 0.0)


def surface_tension_forcing(grid: UnitCellGrid, u: np.ndarray, xi: float, Ca: float, theta_eq: float):
    """Face values of (1/Ca)(3 xi/2) div(grad u (x) grad u)."""
    h = grid.h
    gx, gy = face_gradients(grid, u, xi, theta_eq)
    # cell-centered gradient: mean of the two opposite face derivatives
    ux_c = _nanmean2(gx, np.roll(gx, -1, axis=0))
    uy_c = _nanmean2(gy, np.roll(gy, -1, axis=1))
    ux_c = np.where(grid.fluid, ux_c, 0.0)
    uy_c = np.where(grid.fluid, uy_c, 0.0)
    txx = ux_c * ux_c
    tyy = uy_c * uy_c
    # corner (i,j): x-faces (i,j-1),(i,j); y-faces (i-1,j),(i,j)
    ux_k = _nanmean2(gx, np.roll(gx, 1, axis=1))
    uy_k = _nanmean2(gy, np.roll(gy, 1, axis=0))
    txy = ux_k * uy_k
    coef = 1.5 * xi / Ca
    fx = coef * ((txx - np.roll(txx, 1, axis=0)) + (np.roll(txy, -1, axis=1) - txy)) / h
    fy = coef * ((tyy - np.roll(tyy, 1, axis=1)) + (np.roll(txy, -1, axis=0) - txy)) / h
    fx = np.where(grid.xface_active(), fx, 0.0)
    fy = np.where(grid.yface_active(), fy, 0.0)
    return fx, fy


def _check(sol: CellSolution, tol: float):
    if sol.residuals["momentum"] > tol:
        raise CellSolverError(
            f"momentum residual {sol.residuals['momentum']:.3e} exceeds {tol:.1e}"
        )
    return sol


def solve_pressure_driven(grid, u: PhaseField, params: FluidParams, j: int, lin_tol: float = 1e-10) -> CellSolution:
    """Pressure-driven cell problem for axis ``j`` (1 = x, 2 = y)."""
    return _check(CellProblemSolver(grid, u, params).pressure_driven(j), lin_tol)


def solve_surface_tension(grid, u: PhaseField, params: FluidParams, lin_tol: float = 1e-10) -> CellSolution:
    """Surface-tension-driven cell problem (driver 0)."""
    return _check(CellProblemSolver(grid, u, params).surface_tension(), lin_tol)


def solve_all(grid, u: PhaseField, params: FluidParams, lin_tol: float = 1e-10):
    """All d + 1 cell problems on one factorization: ([w_1, w_2], w_0)."""
    solver = CellProblemSolver(grid, u, params)
    sols = [_check(solver.pressure_driven(j), lin_tol) for j in (1, 2)]
    return sols, _check(solver.surface_tension(), lin_tol)
