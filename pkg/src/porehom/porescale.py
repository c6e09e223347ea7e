"""Transient coupled flow + advective Allen-Cahn in a walled channel.

Nondimensional quasi-incompressible Navier-Stokes with phase-dependent
density and viscosity,

    d(rho)/dt + div(rho v) = 0,
    rho Dv/Dt = -Eu grad p + (1/Re) div(mu (grad v + grad v^T - 2/3 div v I))
                - (1/Fr^2) rho e_y - (eps/Ca)(3 xi/2) div(grad u (x) grad u),
    du/dt + div(v u) = S eps xi lap u - S/(eps xi) P'(u),

on (0, Lx) x (0, Ly).  Walls at y = 0 and y = Ly carry Navier slip with
length eps*lambda and the contact-angle flux for u.  The inlet x = 0 and
outlet x = Lx carry prescribed normal tractions -Eu p_in / -Eu p_out; u is
prescribed at the inlet and leaves freely at the outlet.

Each backward-Euler step is one monolithic Newton solve over all face
velocities, pressures and phase-field values.  The Jacobian is built by
complex-step differentiation of the residual with a geometric column
colouring, so it is exact to round-off without hand-coded derivatives.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree
from scipy.special import expit

from .phasefield import double_well, equilibrium_profile_1d, sqrt_2p

_CS = 1e-30          # complex-step size
_COLOURS = 6         # colour period per axis
_REACH = 2.5         # residual stencil radius in cell widths


class NewtonError(RuntimeError):
    def __init__(self, message: str, residuals):
        super().__init__(message)
        self.residuals = list(residuals)


@dataclass(frozen=True)
class PoreScaleConfig:
    Lx: float = 2.0
    Ly: float = 1.0
    ny: int = 60
    M: float = 1.0
    R: float = 1.0
    Re: float = 1.0
    Ca: float = 10.0
    Eu: float = 1.0
    Fr: float = 1.0
    S: float = 2.0
    xi: float = 1.0 / 15.0
    eps: float = 1.0
    slip_length: float = 0.2
    theta_eq: float = math.pi / 3
    p_in: float = 16.0
    p_out: float = 0.0
    u_in: float = 1.0
    dt: float = 0.025
    t_end: float = 0.8
    gravity: bool = False
    inertia: bool = True
    initial: str = "meniscus"  # meniscus | flat | droplet | single
    x0: float = 0.4
    droplet_center: tuple = (1.0, 0.5)
    droplet_radius: float = 0.25
    newton_tol: float = 1e-8
    newton_maxiter: int = 20
    output_every: int = 1

    def __post_init__(self):
        for k in ("Lx", "Ly", "Re", "Ca", "Eu", "Fr", "S", "xi", "eps", "dt", "M", "R"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        if self.ny < 4:
            raise ValueError("ny must be >= 4")
        if self.slip_length < 0:
            raise ValueError("slip length must be non-negative")
        if not 0 < self.theta_eq < math.pi:
            raise ValueError("contact angle must lie in (0, pi)")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.initial not in ("meniscus", "flat", "droplet", "single"):
            raise ValueError(f"unknown initial condition {self.initial!r}")

    @property
    def h(self) -> float:
        return self.Ly / self.ny

    @classmethod
    def from_dict(cls, d: dict) -> "PoreScaleConfig":
        """Flat keys, optionally grouped in tables (names of tables are ignored)."""
        kw = {}
        for k, v in d.items():
            if isinstance(v, dict):
                kw.update(v)
            else:
                kw[k] = v
        unknown = set(kw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        if "droplet_center" in kw:
            kw["droplet_center"] = tuple(kw["droplet_center"])
        return cls(**kw)

    @property
    def nx(self) -> int:
        return max(4, int(round(self.Lx / self.h)))


@dataclass
class PoreScaleState:
    u: np.ndarray    # (nx, ny) phase field at cell centers
    vx: np.ndarray   # (nx+1, ny) x-velocity on vertical faces
    vy: np.ndarray   # (nx, ny+1) y-velocity on horizontal faces (0 on walls)
    p: np.ndarray    # (nx, ny)
    t: float = 0.0
    newton_residuals: list = field(default_factory=list)

    def max_speed(self) -> float:
        cx = 0.5 * (self.vx[:-1] + self.vx[1:])
        cy = 0.5 * (self.vy[:, :-1] + self.vy[:, 1:])
        return float(np.hypot(cx, cy).max())

    def integral_u(self, h: float) -> float:
        return float(self.u.sum() * h * h)


class _Layout:
    def __init__(self, nx, ny):
        self.nx, self.ny = nx, ny
        self.nu = (nx + 1) * ny
        self.nv = nx * (ny - 1)
        self.nc = nx * ny
        self.off = np.cumsum([0, self.nu, self.nv, self.nc, self.nc])
        self.size = int(self.off[-1])

    def split(self, x):
        nx, ny = self.nx, self.ny
        o = self.off
        U = x[o[0]:o[1]].reshape(nx + 1, ny)
        V = np.zeros((nx, ny + 1), dtype=x.dtype)
        V[:, 1:ny] = x[o[1]:o[2]].reshape(nx, ny - 1)
        P = x[o[2]:o[3]].reshape(nx, ny)
        F = x[o[3]:o[4]].reshape(nx, ny)
        return U, V, P, F

    def join(self, U, V, P, F):
        return np.concatenate([U.ravel(), V[:, 1:-1].ravel(), P.ravel(), F.ravel()])

    def positions(self):
        """Unknown locations in cell units and a type tag per unknown."""
        nx, ny = self.nx, self.ny
        iu, ju = np.meshgrid(np.arange(nx + 1), np.arange(ny), indexing="ij")
        iv, jv = np.meshgrid(np.arange(nx), np.arange(1, ny), indexing="ij")
        ic, jc = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        pos = np.concatenate([
            np.column_stack([iu.ravel(), ju.ravel() + 0.5]),
            np.column_stack([iv.ravel() + 0.5, jv.ravel()]),
            np.column_stack([ic.ravel() + 0.5, jc.ravel() + 0.5]),
            np.column_stack([ic.ravel() + 0.5, jc.ravel() + 0.5]),
        ])
        idx = np.concatenate([
            np.column_stack([iu.ravel(), ju.ravel()]),
            np.column_stack([iv.ravel(), jv.ravel()]),
            np.column_stack([ic.ravel(), jc.ravel()]),
            np.column_stack([ic.ravel(), jc.ravel()]),
        ])
        kind = np.repeat(np.arange(4), [self.nu, self.nv, self.nc, self.nc])
        return pos, idx, kind


def _corner_mean(a):
    """Mean of the available cell values around each corner, shape (nx+1, ny+1)."""
    nx, ny = a.shape
    pad = np.zeros((nx + 2, ny + 2), dtype=a.dtype)
    cnt = np.zeros((nx + 2, ny + 2))
    pad[1:-1, 1:-1] = a
    cnt[1:-1, 1:-1] = 1.0
    s = pad[:-1, :-1] + pad[1:, :-1] + pad[:-1, 1:] + pad[1:, 1:]
    c = cnt[:-1, :-1] + cnt[1:, :-1] + cnt[:-1, 1:] + cnt[1:, 1:]
    return s / c


def _cos(theta):
    c = math.cos(theta)
    return 0.0 if abs(c) < 1e-15 else c


def face_gradients(F, cfg: PoreScaleConfig):
    """Normal derivatives of u on x-faces (nx+1, ny) and y-faces (nx, ny+1)."""
    nx, ny = F.shape
    h = cfg.h
    gx = np.zeros((nx + 1, ny), dtype=F.dtype)
    gx[1:nx] = (F[1:] - F[:-1]) / h
    gx[0] = (F[0] - cfg.u_in) / (0.5 * h)
    gy = np.zeros((nx, ny + 1), dtype=F.dtype)
    gy[:, 1:ny] = (F[:, 1:] - F[:, :-1]) / h
    c = _cos(cfg.theta_eq) / (cfg.eps * cfg.xi)
    if c:
        # contact angle through fluid 1: d u / d n_out = c sqrt(2P), n_out into the wall
        gy[:, 0] = -c * sqrt_2p(F[:, 0])
        gy[:, ny] = c * sqrt_2p(F[:, ny - 1])
    return gx, gy


def surface_stress(F, cfg: PoreScaleConfig):
    """grad u (x) grad u: xx and yy at cells, xy at corners."""
    nx, ny = F.shape
    gx, gy = face_gradients(F, cfg)
    gxc = 0.5 * (gx[:-1] + gx[1:])
    gyc = 0.5 * (gy[:, :-1] + gy[:, 1:])
    gxk = np.empty((nx + 1, ny + 1), dtype=F.dtype)
    gxk[:, 1:ny] = 0.5 * (gx[:, :-1] + gx[:, 1:])
    gxk[:, 0] = gx[:, 0]
    gxk[:, ny] = gx[:, ny - 1]
    gyk = np.empty((nx + 1, ny + 1), dtype=F.dtype)
    gyk[1:nx] = 0.5 * (gy[:-1] + gy[1:])
    gyk[0] = gy[0]
    gyk[nx] = gy[nx - 1]
    return gxc * gxc, gyc * gyc, gxk * gyk


def residual(x, old, cfg: PoreScaleConfig, lay: _Layout):
    """Backward-Euler residual of the coupled system (complex-step safe)."""
    U, V, P, F = lay.split(x)
    Uo, Vo, _, Fo = old
    nx, ny = lay.nx, lay.ny
    h, dt = cfg.h, cfg.dt
    Re, Eu, eps, xi, S = cfg.Re, cfg.Eu, cfg.eps, cfg.xi, cfg.S
    uin = cfg.u_in

    rho = 1.0 + F * (cfg.R - 1.0)
    mu = 1.0 + F * (cfg.M - 1.0)
    rho_old = 1.0 + Fo * (cfg.R - 1.0)
    rho_in = 1.0 + uin * (cfg.R - 1.0)

    # phase field
    gx, gy = face_gradients(F, cfg)
    ax = np.zeros((nx + 1, ny), dtype=x.dtype)
    ax[1:nx] = U[1:nx] * 0.5 * (F[1:] + F[:-1])
    ax[0] = U[0] * np.where(U[0].real > 0, uin, F[0])
    ax[nx] = U[nx] * F[nx - 1]
    ay = np.zeros((nx, ny + 1), dtype=x.dtype)
    ay[:, 1:ny] = V[:, 1:ny] * 0.5 * (F[:, 1:] + F[:, :-1])
    _, dP, _ = double_well(F)
    r_pf = (
        (F - Fo) / dt
        + (np.diff(ax, axis=0) + np.diff(ay, axis=1)) / h
        - S * eps * xi * (np.diff(gx, axis=0) + np.diff(gy, axis=1)) / h
        + S / (eps * xi) * dP
    )

    # mass
    rx = np.zeros((nx + 1, ny), dtype=x.dtype)
    rx[1:nx] = 0.5 * (rho[1:] + rho[:-1])
    rx[0] = np.where(U[0].real > 0, rho_in, rho[0])
    rx[nx] = rho[nx - 1]
    ry = np.zeros((nx, ny + 1), dtype=x.dtype)
    ry[:, 1:ny] = 0.5 * (rho[:, 1:] + rho[:, :-1])
    r_mass = (rho - rho_old) / dt + (np.diff(rx * U, axis=0) + np.diff(ry * V, axis=1)) / h

    # stresses
    dUdx = np.diff(U, axis=0) / h
    dVdy = np.diff(V, axis=1) / h
    div = dUdx + dVdy
    sxx = mu * (2 * dUdx - 2.0 / 3.0 * div)
    syy = mu * (2 * dVdy - 2.0 / 3.0 * div)
    lam = eps * cfg.slip_length
    gyU = np.zeros((nx + 1, ny + 1), dtype=x.dtype)
    gyU[:, 1:ny] = np.diff(U, axis=1) / h
    gyU[:, 0] = U[:, 0] / (lam + 0.5 * h)
    gyU[:, ny] = -U[:, ny - 1] / (lam + 0.5 * h)
    gxV = np.zeros((nx + 1, ny + 1), dtype=x.dtype)
    gxV[1:nx] = np.diff(V, axis=0) / h
    sxy = _corner_mean(mu) * (gyU + gxV)

    cst = eps / cfg.Ca * 1.5 * xi
    Txx, Tyy, Txy = surface_stress(F, cfg)
    Sig_xx = -Eu * P + sxx / Re - cst * Txx
    Sig_yy = -Eu * P + syy / Re - cst * Tyy
    Sig_xy = sxy / Re - cst * Txy

    # x-momentum: interior faces, then half control volumes at inlet/outlet
    r_u = np.empty((nx + 1, ny), dtype=x.dtype)
    dydSxy = np.diff(Sig_xy, axis=1) / h
    r_u[1:nx] = -(np.diff(Sig_xx, axis=0) / h + dydSxy[1:nx])
    r_u[0] = -((Sig_xx[0] + Eu * cfg.p_in) / (0.5 * h) + dydSxy[0])
    r_u[nx] = -((-Eu * cfg.p_out - Sig_xx[nx - 1]) / (0.5 * h) + dydSxy[nx])
    rho_u = np.empty((nx + 1, ny), dtype=x.dtype)
    rho_u[1:nx] = 0.5 * (rho[1:] + rho[:-1])
    rho_u[0] = rho[0]
    rho_u[nx] = rho[nx - 1]
    acc_u = (U - Uo) / dt
    if cfg.inertia:
        dUdx_f = np.empty((nx + 1, ny), dtype=x.dtype)
        dUdx_f[1:nx] = (U[2:] - U[:-2]) / (2 * h)
        dUdx_f[0] = (U[1] - U[0]) / h
        dUdx_f[nx] = (U[nx] - U[nx - 1]) / h
        Vc = 0.5 * (V[:, :-1] + V[:, 1:])  # cell-centered v
        Vbar = np.empty((nx + 1, ny), dtype=x.dtype)
        Vbar[1:nx] = 0.5 * (Vc[1:] + Vc[:-1])
        Vbar[0] = Vc[0]
        Vbar[nx] = Vc[nx - 1]
        dUdy_f = 0.5 * (gyU[:, :-1] + gyU[:, 1:])
        acc_u = acc_u + U * dUdx_f + Vbar * dUdy_f
    r_u = r_u + rho_u * acc_u

    # y-momentum on interior horizontal faces
    rho_v = 0.5 * (rho[:, 1:] + rho[:, :-1])
    Vi = V[:, 1:ny]
    acc_v = (Vi - Vo[:, 1:ny]) / dt
    if cfg.inertia:
        Ubar = 0.25 * (U[:-1, :-1] + U[1:, :-1] + U[:-1, 1:] + U[1:, 1:])
        dVdx = 0.5 * (gxV[:-1, 1:ny] + gxV[1:, 1:ny])
        dVdy_f = (V[:, 2:] - V[:, :-2]) / (2 * h)
        acc_v = acc_v + Ubar * dVdx + Vi * dVdy_f
    r_v = rho_v * acc_v - (np.diff(Sig_yy, axis=1) / h + np.diff(Sig_xy[:, 1:ny], axis=0) / h)
    if cfg.gravity:
        r_v = r_v + rho_v / cfg.Fr ** 2

    return np.concatenate([r_u.ravel(), r_v.ravel(), r_mass.ravel(), r_pf.ravel()])


class _ColouredJacobian:
    """Sparse Jacobian by complex-step on coloured column groups."""

    def __init__(self, lay: _Layout):
        pos, idx, kind = lay.positions()
        tree = cKDTree(pos)
        pairs = tree.query_pairs(_REACH + 1e-9, output_type="ndarray")
        n = lay.size
        rows = np.concatenate([np.arange(n), pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([np.arange(n), pairs[:, 1], pairs[:, 0]])
        colour = kind * _COLOURS * _COLOURS + (idx[:, 0] % _COLOURS) * _COLOURS + idx[:, 1] % _COLOURS
        groups = []
        ccol = colour[cols]
        order = np.argsort(ccol, kind="stable")
        rows, cols, ccol = rows[order], cols[order], ccol[order]
        bounds = np.flatnonzero(np.diff(ccol)) + 1
        for r_, c_ in zip(np.split(rows, bounds), np.split(cols, bounds)):
            groups.append((np.unique(c_), r_, c_))
        self.groups = groups
        self.n = n

    def __call__(self, fun, x):
        data, ri, ci = [], [], []
        for members, r_, c_ in self.groups:
            xc = x.astype(complex)
            xc[members] += 1j * _CS
            im = fun(xc).imag / _CS
            data.append(im[r_])
            ri.append(r_)
            ci.append(c_)
        J = sp.csc_matrix(
            (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
            shape=(self.n, self.n),
        )
        J.eliminate_zeros()
        return J


class PoreScaleSolver:
    """Holds the grid layout and coloured Jacobian for one configuration."""

    def __init__(self, cfg: PoreScaleConfig):
        self.cfg = cfg
        self.lay = _Layout(cfg.nx, cfg.ny)
        self.jac = _ColouredJacobian(self.lay)

    def initial_state(self) -> PoreScaleState:
        return initial_state(self.cfg)

    def step(self, state: PoreScaleState) -> PoreScaleState:
        cfg, lay = self.cfg, self.lay
        old = (state.vx, state.vy, state.p, state.u)
        x = lay.join(state.vx, state.vy, state.p, state.u).astype(float)

        def fun(z):
            return residual(z, old, cfg, lay)

        history = []
        r = fun(x)
        history.append(float(np.abs(r).max()))
        for _ in range(cfg.newton_maxiter):
            if history[-1] <= cfg.newton_tol and len(history) > 1:
                break
            J = self.jac(fun, x)
            try:
                dx = spla.splu(J, permc_spec="COLAMD").solve(r)
            except RuntimeError as exc:
                raise NewtonError(f"singular Jacobian at t={state.t + cfg.dt:g}: {exc}", history) from exc
            x = x - dx
            r = fun(x)
            history.append(float(np.abs(r).max()))
            if not np.isfinite(history[-1]):
                raise NewtonError(f"Newton diverged at t={state.t + cfg.dt:g}", history)
            if history[-1] <= cfg.newton_tol:
                break
        else:
            raise NewtonError(
                f"Newton did not reach {cfg.newton_tol:g} at t={state.t + cfg.dt:g} "
                f"(last residual {history[-1]:.3e})",
                history,
            )
        U, V, P, F = lay.split(x)
        return PoreScaleState(F.copy(), U.copy(), V.copy(), P.copy(), state.t + cfg.dt, history)


def initial_state(cfg: PoreScaleConfig) -> PoreScaleState:
    nx, ny, h = cfg.nx, cfg.ny, cfg.h
    xc = (np.arange(nx) + 0.5) * h
    yc = (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    if cfg.initial == "single":
        u = np.zeros((nx, ny))
    elif cfg.initial == "flat":
        u = equilibrium_profile_1d(cfg.x0 - X, cfg.xi)
    elif cfg.initial == "droplet":
        cx, cy = cfg.droplet_center
        d = np.hypot(X - cx, Y - cy) - cfg.droplet_radius
        u = expit(-5.0 * d / cfg.xi)
    else:
        # circular arc through the channel meeting both walls at theta_eq
        half = 0.5 * cfg.Ly
        c = math.cos(cfg.theta_eq)
        if abs(c) < 1e-12:
            u = equilibrium_profile_1d(cfg.x0 - X, cfg.xi)
        else:
            Rc = half / abs(c)
            cx = cfg.x0 + Rc if c > 0 else cfg.x0 - Rc
            dist = np.hypot(X - cx, Y - half)
            sd = dist - Rc if c > 0 else Rc - dist  # > 0 on the fluid-1 side
            u = equilibrium_profile_1d(sd, cfg.xi)
    vx = np.zeros((nx + 1, ny))
    vy = np.zeros((nx, ny + 1))
    p = cfg.p_in + (cfg.p_out - cfg.p_in) * X / cfg.Lx
    return PoreScaleState(u, vx, vy, p, 0.0)


def step(state: PoreScaleState, config: PoreScaleConfig, solver: Optional[PoreScaleSolver] = None) -> PoreScaleState:
    """One backward-Euler step of the coupled system."""
    return (solver or PoreScaleSolver(config)).step(state)


def _crossings(u_row, h):
    """x of the first 1 -> 0 crossing of u = 1/2 along a row (NaN if none)."""
    s = u_row - 0.5
    k = np.flatnonzero((s[:-1] >= 0) & (s[1:] < 0))
    if k.size == 0:
        return math.nan
    i = k[0]
    t = s[i] / (s[i] - s[i + 1])
    return (i + 0.5 + t) * h


def contact_angles(state: PoreScaleState, cfg: PoreScaleConfig) -> tuple[float, float]:
    """Angles (radians, through fluid 1) at the top and bottom walls.

    Fits the u = 1/2 contour over wall rows within xi/2 of each wall
    (at least two rows).  Returned as (left, right) looking downstream,
    i.e. (top wall y = Ly, bottom wall y = 0).
    """
    h, ny = cfg.h, cfg.ny
    k = max(2, int(math.floor(0.5 * cfg.xi / h + 0.5)))
    out = []
    for rows, sign in ((range(ny - 1, ny - 1 - k, -1), -1.0), (range(k), 1.0)):
        ys, xs = [], []
        for j in rows:
            x = _crossings(state.u[:, j], h)
            if math.isfinite(x):
                ys.append((j + 0.5) * h)
                xs.append(x)
        if len(xs) < 2:
            out.append(math.nan)
            continue
        b = np.polyfit(ys, xs, 1)[0]  # dx/dy
        # tangent pointing away from the wall: (sign*b, sign); wall into fluid 1: (-1, 0)
        cos_t = -sign * b / math.hypot(b, 1.0)
        out.append(math.acos(max(-1.0, min(1.0, cos_t))))
    return out[0], out[1]


def interface_shape(state: PoreScaleState, cfg: PoreScaleConfig) -> tuple[float, float]:
    """(x_mid, x_wall): u = 1/2 crossing at mid-height and mean over the wall rows."""
    ny, h = cfg.ny, cfg.h
    mids = [ny // 2 - 1, ny // 2] if ny % 2 == 0 else [ny // 2]
    x_mid = float(np.nanmean([_crossings(state.u[:, j], h) for j in mids]))
    x_wall = float(np.nanmean([_crossings(state.u[:, 0], h), _crossings(state.u[:, ny - 1], h)]))
    return x_mid, x_wall


@dataclass
class RunResult:
    states: list
    summary: list  # rows (t, max|v|, angle_left, angle_right, integral_u)
    cfl: float

    SUMMARY_HEADER = ("t", "max_v", "contact_angle_left", "contact_angle_right", "integral_u")

    def write_summary(self, path) -> None:
        from .io import write_rows_csv

        write_rows_csv(path, self.SUMMARY_HEADER, self.summary)


def _summary_row(state, cfg):
    left, right = contact_angles(state, cfg) if cfg.initial != "single" else (math.nan, math.nan)
    return (state.t, state.max_speed(), left, right, state.integral_u(cfg.h))


def run(config: PoreScaleConfig, state: Optional[PoreScaleState] = None,
        callback: Optional[Callable] = None, vtk_dir=None) -> RunResult:
    """Step from t = 0 (or ``state``) to ``t_end``; keeps every ``output_every``-th state."""
    solver = PoreScaleSolver(config)
    state = state or solver.initial_state()
    nsteps = int(round((config.t_end - state.t) / config.dt))
    states = [state]
    summary = [_summary_row(state, config)]
    cfl = 0.0
    if vtk_dir is not None:
        _write_state_vtk(vtk_dir, state, config, 0)
    for k in range(1, nsteps + 1):
        state = solver.step(state)
        c = state.max_speed() * config.dt / config.h
        cfl = max(cfl, c)
        summary.append(_summary_row(state, config))
        if k % config.output_every == 0 or k == nsteps:
            states.append(state)
            if vtk_dir is not None:
                _write_state_vtk(vtk_dir, state, config, k)
        if callback is not None:
            callback(state)
    if cfl > 1.0:
        warnings.warn(f"CFL number reached {cfl:.2f} (advisory, the scheme is implicit)", stacklevel=2)
    return RunResult(states, summary, cfl)


def _write_state_vtk(directory, state, cfg, k):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nx, ny, h = cfg.nx, cfg.ny, cfg.h
    cx = 0.5 * (state.vx[:-1] + state.vx[1:])
    cy = 0.5 * (state.vy[:, :-1] + state.vy[:, 1:])
    lines = [
        "# vtk DataFile Version 3.0",
        f"pore-scale t={state.t:.6g}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx + 1} {ny + 1} 2",
        "ORIGIN 0 0 0",
        f"SPACING {h!r} {h!r} {h!r}",
        f"CELL_DATA {nx * ny}",
    ]
    for name, a in (("u", state.u), ("p", state.p)):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [" ".join(f"{v:.10g}" for v in a[:, j]) for j in range(ny)]
    lines.append("VECTORS v double")
    for j in range(ny):
        lines.append(" ".join(f"{cx[i, j]:.10g} {cy[i, j]:.10g} 0" for i in range(nx)))
    (directory / f"state_{k:05d}.vtk").write_text("\n".join(lines) + "\n")
