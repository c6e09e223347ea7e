"""Command line entry point: ``porehom {cell,sweep,porescale,nondim,geometry}``.

Every subcommand reads an optional TOML file (``--config``); flags given on
the command line override the file.  Exit codes: 0 success, 1 invalid
configuration, 2 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from .effective import AnisotropyError, absolute_permeability
from .geometry import GeometryError, build_unit_cell, porosity, read_mask_file, write_mask_file
from .phasefield import RelaxationError
from .pipeline import (
    ConfigError,
    ReferenceValues,
    SweepConfig,
    _radius_record,
    geometry_from_spec,
    nondim,
    sweep,
    tomllib,
)
from .porescale import NewtonError, PoreScaleConfig, run
from .stokescell import CellSolverError

log = logging.getLogger("porehom")

SOLVER_ERRORS = (CellSolverError, RelaxationError, NewtonError, AnisotropyError, np.linalg.LinAlgError)


def _load_toml(path):
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _add_geometry_flags(p):
    g = p.add_argument_group("geometry")
    g.add_argument("--kind", choices=["obstacle", "cross", "channel", "mask", "empty"])
    g.add_argument("--side", type=float, help="obstacle side length")
    g.add_argument("--width", type=float, help="cross arm width")
    g.add_argument("--height", type=float, help="channel height")
    g.add_argument("--mask", "--geometry", dest="mask_path", help="mask file (implies --kind mask)")
    g.add_argument("--n", type=int, help="cells per unit length")


def _add_fluid_flags(p):
    g = p.add_argument_group("fluid")
    for name, help_ in (("M", "viscosity ratio"), ("R", "density ratio"), ("Ca", "capillary number"),
                        ("Re", "Reynolds number"), ("Eu_bar", "cell Euler number"),
                        ("slip_length", "slip length"), ("theta_eq", "contact angle [rad]"),
                        ("xi", "interface width"), ("S", "phase-field mobility")):
        g.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float, help=help_)


def _sweep_config(args) -> SweepConfig:
    cfg = SweepConfig.from_dict(_load_toml(args.config)) if args.config else SweepConfig()
    over = {}
    if args.mask_path:
        over["geometry"] = geometry_from_spec("mask", path=args.mask_path)
        if args.n is None:
            over["n"] = read_mask_file(args.mask_path).shape[0]
    elif args.kind:
        over["geometry"] = geometry_from_spec(args.kind, args.side, args.width, args.height)
    elif any(v is not None for v in (args.side, args.width, args.height)):
        g = cfg.geometry
        kind = type(g).__name__.lower()
        over["geometry"] = geometry_from_spec(
            kind, args.side or getattr(g, "side", None), args.width or getattr(g, "width", None),
            args.height or getattr(g, "height", None),
        )
    if args.n is not None:
        over["n"] = args.n
    for k in ("M", "R", "Ca", "Re", "Eu_bar", "slip_length", "theta_eq", "xi", "S"):
        v = getattr(args, k)
        if v is not None:
            over[k] = v
    if args.center is not None:
        over["center"] = tuple(args.center)
    if getattr(args, "radii", None):
        over["radii"] = tuple(args.radii)
    if args.relax_steps is not None:
        over["relax_steps"] = args.relax_steps
    if args.filtering is not None:
        over["filtering"] = args.filtering
    if getattr(args, "output", None):
        over["output_csv"] = args.output
    if args.vtk_dir:
        over["vtk_dir"] = args.vtk_dir
    try:
        return replace(cfg, **over)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_geometry(args) -> int:
    if args.config:
        cfg = SweepConfig.from_dict(_load_toml(args.config))
        kind, n = cfg.geometry, cfg.n
    else:
        kind, n = None, 128
    if args.mask_path:
        kind = geometry_from_spec("mask", path=args.mask_path)
    elif args.kind:
        kind = geometry_from_spec(args.kind, args.side, args.width, args.height)
    if kind is None:
        raise ConfigError("geometry needs --kind, --mask or --config")
    if args.n:
        n = args.n
    elif args.mask_path:
        n = read_mask_file(args.mask_path).shape[0]
    grid = build_unit_cell(kind, n)
    if args.write_mask:
        write_mask_file(args.write_mask, grid)
    if args.vtk:
        from .io import write_vtk

        write_vtk(args.vtk, grid, {"solid": grid.solid.astype(float)})
    if args.print_porosity:
        print(f"{porosity(grid):.4f}")
    else:
        _, ncomp = grid.components()
        print(json.dumps({"geometry": grid.label, "n": grid.n, "porosity": porosity(grid),
                          "fluid_cells": grid.n_fluid, "components": ncomp}))
    return 0


def _cmd_nondim(args) -> int:
    d = _load_toml(args.config).get("reference", {}) if args.config else {}
    if not args.all_ones:
        for k in ("L", "ell", "v", "rho", "mu", "p", "gamma", "g", "sigma"):
            v = getattr(args, k)
            if v is not None:
                d[k] = v
    try:
        refs = ReferenceValues(**({} if args.all_ones else d))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    out = nondim(refs)
    for k in ("Re", "Ca", "Eu", "Fr", "S", "eps"):
        print(f"{k} = {out[k]!r}")
    return 0


def _cmd_cell(args) -> int:
    cfg = _sweep_config(args)
    radius = args.radius if args.radius is not None else (cfg.radii[0] if cfg.radii else None)
    if radius is None or radius < 0:
        raise ConfigError("cell needs a non-negative --radius (or radii in the config)")
    grid = build_unit_cell(cfg.geometry, cfg.n)
    kabs = absolute_permeability(grid, cfg.fluid_params(), filtered=cfg.filtering)
    kabs_raw = absolute_permeability(grid, cfg.fluid_params()) if cfg.filtering else None
    rec = _radius_record(cfg, grid, float(radius), kabs, kabs_raw)
    out = {
        "geometry": rec.geometry, "radius": radius, "s1": rec.s1, "area": rec.area, "phi": rec.phi,
        "kappa_abs": kabs.tensor.tolist(),
        "K_rel1": rec.K_rel1.tolist(), "K_rel2": rec.K_rel2.tolist(),
        "M1": rec.M1.tolist(), "M2": rec.M2.tolist(),
    }
    if rec.K_rel1_raw is not None:
        out["K_rel1_raw"] = rec.K_rel1_raw.tolist()
        out["K_rel2_raw"] = rec.K_rel2_raw.tolist()
    text = json.dumps(out, indent=2)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _sweep_config(args)
    records = sweep(cfg, workers=args.workers)
    if not cfg.output_csv:
        from .effective import CSV_HEADER

        print(",".join(CSV_HEADER))
        for r in records:
            print(",".join(str(v) for v in r.row()))
    else:
        print(f"wrote {len(records)} rows to {cfg.output_csv}")
    return 0


def _cmd_porescale(args) -> int:
    try:
        cfg = PoreScaleConfig.from_dict(_load_toml(args.config)) if args.config else PoreScaleConfig()
        over = {k: getattr(args, k) for k in ("ny", "Lx", "Ly", "dt", "t_end", "theta_eq", "S", "xi",
                                              "p_in", "p_out", "slip_length", "M", "R", "Ca", "Re",
                                              "Eu", "initial")
                if getattr(args, k) is not None}
        if args.gravity:
            over["gravity"] = True
        cfg = replace(cfg, **over)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    res = run(cfg, vtk_dir=args.vtk_dir)
    if args.summary:
        res.write_summary(args.summary)
    last = res.summary[-1]
    print(json.dumps({
        "t": last[0], "max_v": last[1],
        "contact_angle_left_deg": math.degrees(last[2]) if math.isfinite(last[2]) else None,
        "contact_angle_right_deg": math.degrees(last[3]) if math.isfinite(last[3]) else None,
        "integral_u": last[4], "cfl": res.cfl, "steps": len(res.summary) - 1,
    }))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="porehom", description=__doc__.splitlines()[0])
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geometry", help="build a unit cell and report porosity")
    p.add_argument("--config")
    _add_geometry_flags(p)
    p.add_argument("--print-porosity", action="store_true", help="print only the porosity")
    p.add_argument("--write-mask", help="write the solid mask to this file")
    p.add_argument("--vtk", help="write the solid mask as VTK")
    p.set_defaults(func=_cmd_geometry)

    p = sub.add_parser("nondim", help="dimensionless numbers from reference scales")
    p.add_argument("--config", help="TOML with a [reference] table")
    p.add_argument("--all-ones", action="store_true", help="use unit reference values")
    for k in ("L", "ell", "v", "rho", "mu", "p", "gamma", "g", "sigma"):
        p.add_argument(f"--{k}", type=float)
    p.set_defaults(func=_cmd_nondim)

    for name, func, help_ in (("cell", _cmd_cell, "one droplet radius: relax + cell problems"),
                              ("sweep", _cmd_sweep, "relative-permeability sweep over radii")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config")
        _add_geometry_flags(p)
        _add_fluid_flags(p)
        p.add_argument("--center", type=float, nargs=2)
        p.add_argument("--relax-steps", type=int)
        p.add_argument("--filtering", action=argparse.BooleanOptionalAction, default=None)
        p.add_argument("--vtk-dir")
        if name == "cell":
            p.add_argument("--radius", type=float)
            p.add_argument("--json", help="also write the result to this file")
        else:
            p.add_argument("--radii", type=float, nargs="+")
            p.add_argument("--output", help="CSV path (overrides [output] csv)")
            p.add_argument("--workers", type=int, help="parallel radii (default POREHOM_WORKERS)")
        p.set_defaults(func=func)

    p = sub.add_parser("porescale", help="transient channel simulation")
    p.add_argument("--config")
    p.add_argument("--ny", type=int)
    for k in ("Lx", "Ly", "dt", "t_end", "theta_eq", "S", "xi", "p_in", "p_out", "slip_length",
              "M", "R", "Ca", "Re", "Eu"):
        p.add_argument(f"--{k.replace('_', '-')}", dest=k, type=float)
    p.add_argument("--initial", choices=["meniscus", "flat", "droplet", "single"])
    p.add_argument("--gravity", action="store_true")
    p.add_argument("--summary", help="summary CSV path")
    p.add_argument("--vtk-dir")
    p.set_defaults(func=_cmd_porescale)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, GeometryError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
