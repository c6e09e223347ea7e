"""Diffuse-interface two-phase flow in periodic pore geometries.

Cell problems for effective mobility and surface-tension tensors,
relative-permeability sweeps, net-flow filtering of recirculation, and a
transient channel simulator.
"""
from .geometry import (
    Channel,
    Cross,
    Empty,
    GeometryError,
    MaskFile,
    Obstacle,
    UnitCellGrid,
    build_unit_cell,
    porosity,
)
from .phasefield import PhaseField, PhaseFieldParams, initial_droplet, relax, saturation
from .stokescell import CellSolverError, CellVelocity, FluidParams, solve_all
from .effective import (
    AnisotropyError,
    absolute_permeability,
    effective_parameters,
    relative_permeability,
)
from .streamflow import net_flow_mask, trace_streamline
from .pipeline import ConfigError, ReferenceValues, SweepConfig, nondim, sweep

__version__ = "0.1.0"
