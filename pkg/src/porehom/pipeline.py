"""Saturation sweeps over nested droplet families and the nondimensional numbers.

A sweep fixes one droplet center and a list of increasing radii.  For each
radius the droplet is rasterized, relaxed for a few pseudo-time steps to
set the contact angle, and fed into the cell problems; each radius yields
one :class:`~porehom.effective.RelPermRecord`.
"""
from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .effective import (
    AnisotropyError,
    RelPermRecord,
    absolute_permeability,
    effective_parameters,
    relperm_record,
    write_relperm_csv,
)
from .geometry import (
    Channel,
    Cross,
    Empty,
    GeometryError,
    GeometryKind,
    MaskFile,
    Obstacle,
    UnitCellGrid,
    build_unit_cell,
    periodic_delta,
)
from .phasefield import PhaseFieldParams, initial_droplet, relax, saturation
from .stokescell import FluidParams

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def geometry_from_spec(kind: str, side=None, width=None, height=None, path=None) -> GeometryKind:
    kind = kind.lower()
    if kind == "obstacle":
        return Obstacle(0.45 if side is None else float(side))
    if kind == "cross":
        return Cross(0.3 if width is None else float(width))
    if kind == "channel":
        return Channel(0.5 if height is None else float(height))
    if kind in ("mask", "maskfile"):
        if path is None:
            raise ConfigError("mask geometry needs a path")
        return MaskFile(str(path))
    if kind == "empty":
        return Empty()
    raise ConfigError(f"unknown geometry kind {kind!r}")


@dataclass(frozen=True)
class SweepConfig:
    geometry: GeometryKind = field(default_factory=lambda: Obstacle(0.45))
    n: int = 128
    center: tuple = (0.0, 0.0)
    radii: Optional[tuple] = None
    n_radii: int = 12
    M: float = 1.0
    R: float = 1.0
    Ca: float = 1.0
    Re: float = 1.0
    Eu_bar: float = 1.0
    slip_length: float = 0.0
    theta_eq: float = math.pi / 2
    xi: float = 0.04
    S: float = 1.0
    relax_steps: int = 50
    dt: Optional[float] = None
    filtering: bool = False
    output_csv: Optional[str] = None
    vtk_dir: Optional[str] = None

    def __post_init__(self):
        if self.n < 8:
            raise ConfigError("resolution n must be >= 8")
        c = tuple(float(x) for x in self.center)
        if len(c) != 2 or not all(0.0 <= x <= 1.0 for x in c):
            raise ConfigError(f"droplet center {self.center} must lie in Y = [0, 1]^2")
        object.__setattr__(self, "center", c)
        if self.radii is not None:
            r = tuple(float(x) for x in self.radii)
            if not r:
                raise ConfigError("radius list is empty")
            if any(x < 0 for x in r) or any(b <= a for a, b in zip(r, r[1:])):
                raise ConfigError("radii must be non-negative and strictly increasing")
            object.__setattr__(self, "radii", r)
        if self.n_radii < 1:
            raise ConfigError("n_radii must be positive")
        if self.xi <= 0 or self.S <= 0 or self.relax_steps < 0:
            raise ConfigError("xi and S must be positive, relax_steps non-negative")
        try:
            self.fluid_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def fluid_params(self) -> FluidParams:
        return FluidParams(
            M=self.M, R=self.R, Ca=self.Ca, Re=self.Re, Eu_bar=self.Eu_bar,
            xi=self.xi, slip_length=self.slip_length, theta_eq=self.theta_eq, S=self.S,
        )

    def phasefield_params(self) -> PhaseFieldParams:
        return PhaseFieldParams(
            S=self.S, xi=self.xi, theta_eq=self.theta_eq, dt=self.dt,
            max_steps=max(self.relax_steps, 1),
        )

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        d = dict(d)
        kw = {}
        geo = d.pop("geometry", {})
        if isinstance(geo, dict):
            if "kind" in geo:
                kw["geometry"] = geometry_from_spec(
                    geo.get("kind"), geo.get("side"), geo.get("width"),
                    geo.get("height"), geo.get("path"),
                )
            if "n" in geo:
                kw["n"] = int(geo["n"])
        elif isinstance(geo, str):
            kw["geometry"] = geometry_from_spec(geo)
        drop = d.pop("droplet", {})
        if "center" in drop:
            kw["center"] = tuple(drop["center"])
        if "radii" in drop:
            kw["radii"] = tuple(drop["radii"])
        if "n_radii" in drop:
            kw["n_radii"] = int(drop["n_radii"])
        for sec in ("fluid", "phasefield"):
            for k, v in d.pop(sec, {}).items():
                kw[{"relax_steps": "relax_steps"}.get(k, k)] = v
        out = d.pop("output", {})
        if "csv" in out:
            kw["output_csv"] = str(out["csv"])
        if "vtk_dir" in out:
            kw["vtk_dir"] = str(out["vtk_dir"])
        post = d.pop("postprocess", {})
        if "filtering" in post:
            kw["filtering"] = bool(post["filtering"])
        kw.update(d)
        valid = set(cls.__dataclass_fields__)
        unknown = set(kw) - valid
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_toml(cls, path) -> "SweepConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)


def default_radii(grid: UnitCellGrid, center, count: int = 12) -> tuple:
    """``count`` radii at interval midpoints between the nearest and farthest
    fluid-cell center (periodic distance)."""
    X, Y = grid.cell_centers()
    d = np.hypot(periodic_delta(X, center[0]), periodic_delta(Y, center[1]))[grid.fluid]
    lo, hi = float(d.min()), float(d.max())
    return tuple(lo + (k + 0.5) * (hi - lo) / count for k in range(count))


def _radius_record(cfg: SweepConfig, grid: UnitCellGrid, r: float, kabs, kabs_raw=None) -> RelPermRecord:
    u0 = initial_droplet(grid, cfg.center, r, cfg.xi)
    s0 = saturation(grid, u0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        u = relax(grid, u0, cfg.phasefield_params(), s_target=s0) if cfg.relax_steps else u0
    fp = cfg.fluid_params()
    out = effective_parameters(grid, u, fp, filtered=cfg.filtering, return_solutions=cfg.vtk_dir is not None)
    if cfg.vtk_dir is not None:
        eff, sols, s0l, masks = out
        _write_radius_vtk(cfg, grid, r, u, sols, s0l, masks)
    else:
        eff = out
    droplet = {"center": cfg.center, "radius": r}
    return relperm_record(eff, kabs, fp, grid.label, droplet, kabs_raw)


def _write_radius_vtk(cfg, grid, r, u, sols, s0, masks):
    from .io import write_vtk

    fields = {"u": u.values, "pi0": s0.pi}
    for j, s in enumerate(sols, start=1):
        vx, vy = s.w.centers()
        fields[f"w{j}"] = np.stack([vx, vy], axis=-1)
        if masks is not None:
            fields[f"mask{j}"] = masks[j - 1].cells.astype(float)
    vx, vy = s0.w.centers()
    fields["w0"] = np.stack([vx, vy], axis=-1)
    write_vtk(Path(cfg.vtk_dir) / f"radius_{r:.6f}.vtk", grid, fields)


def _worker(args):
    cfg, r, kabs, kabs_raw = args
    grid = build_unit_cell(cfg.geometry, cfg.n)
    try:
        return r, _radius_record(cfg, grid, r, kabs, kabs_raw), None
    except Exception as exc:  # logged by the parent, sweep continues
        return r, None, f"{type(exc).__name__}: {exc}"


def worker_budget() -> int:
    try:
        return max(1, int(os.environ.get("POREHOM_WORKERS", "1")))
    except ValueError:
        return 1


def sweep(cfg: SweepConfig, workers: Optional[int] = None) -> list[RelPermRecord]:
    """Run the saturation sweep; failed radii are logged and skipped."""
    grid = build_unit_cell(cfg.geometry, cfg.n)
    radii = cfg.radii if cfg.radii is not None else default_radii(grid, cfg.center, cfg.n_radii)
    kabs = absolute_permeability(grid, cfg.fluid_params(), filtered=cfg.filtering)
    if not kabs.isotropic:
        raise AnisotropyError(
            f"kappa_abs is anisotropic for {grid.label}: {kabs.tensor.tolist()}"
        )
    kabs_raw = absolute_permeability(grid, cfg.fluid_params()) if cfg.filtering else None
    workers = workers or worker_budget()
    jobs = [(cfg, r, kabs, kabs_raw) for r in radii]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            results = list(ex.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]
    records = []
    for r, rec, err in results:
        if err is not None:
            log.warning("radius %.6g failed: %s", r, err)
            continue
        records.append(rec)
    records.sort(key=lambda rec: rec.s1)
    if cfg.output_csv:
        write_relperm_csv(cfg.output_csv, records)
    return records


@dataclass(frozen=True)
class ReferenceValues:
    """Dimensional reference scales (SI units)."""

    L: float = 1.0       # macroscopic length
    ell: float = 1.0     # pore length
    v: float = 1.0       # velocity
    rho: float = 1.0     # density
    mu: float = 1.0      # viscosity
    p: float = 1.0       # pressure
    gamma: float = 1.0   # surface tension
    g: float = 1.0       # gravity
    sigma: float = 1.0   # phase-field diffusivity
    xi: Optional[float] = None
    slip: Optional[float] = None

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v is not None and not v > 0:
                raise ConfigError(f"reference value {k} must be positive, got {v}")


def nondim(refs: ReferenceValues) -> dict:
    """Re, Ca, Eu, Fr, S and the scale separation eps."""
    eps = refs.ell / refs.L
    if eps >= 1:
        warnings.warn(f"scale separation eps = {eps:g} is not below 1", stacklevel=2)
    return {
        "Re": refs.rho * refs.v * refs.L / refs.mu,
        "Ca": refs.v * refs.mu / refs.gamma,
        "Eu": refs.p / (refs.rho * refs.v ** 2),
        "Fr": refs.v / math.sqrt(refs.g * refs.L),
        "S": refs.sigma / refs.v,
        "eps": eps,
    }
