import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from porehom.geometry import Channel, Cross, Empty, Obstacle, build_unit_cell
from porehom.phasefield import PhaseField, initial_droplet
from porehom.stokescell import (
    CellProblemSolver,
    CellSolverError,
    CellVelocity,
    FluidParams,
    solve_all,
    solve_pressure_driven,
    solve_surface_tension,
    surface_tension_forcing,
)


def _channel_mean(n, H=0.5, **kw):
    g = build_unit_cell(Channel(H), n)
    p = FluidParams(**kw)
    sol = solve_pressure_driven(g, PhaseField.constant(g, 0.0, 0.1), p, 1)
    return g, sol, sol.w.wx[g.fluid].mean()


def test_poiseuille_mean_and_second_order():
    H = 0.5
    errs = []
    for n in (16, 32, 64):
        g, sol, mean = _channel_mean(n, H)
        exact = H ** 2 / 12
        errs.append(abs(mean - exact) / exact)
        assert np.abs(sol.w.wy).max() < 1e-12
    assert errs[-1] < 0.02
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_poiseuille_profile_shape():
    g, sol, _ = _channel_mean(64)
    prof = sol.w.wx[0, g.fluid[0]]
    y = (np.arange(64) + 0.5) / 64
    yy = y[g.fluid[0]] - y[g.fluid[0]][0] + 0.5 / 64
    exact = 0.5 * yy * (0.5 - yy)
    assert np.abs(prof - exact).max() < 2e-3 * exact.max()


def test_slip_poiseuille_mean():
    # u = G/2 (y (H - y) + lam H) with G = Re Eu_bar, mean G (H^2/12 + lam H/2)
    H, lam = 0.5, 0.05
    _, _, mean = _channel_mean(64, H, slip_length=lam)
    assert mean == pytest.approx(H ** 2 / 12 + lam * H / 2, rel=0.01)


def test_linear_in_forcing():
    g = build_unit_cell(Obstacle(0.45), 40)
    u = PhaseField.constant(g, 0.0, 0.1)
    a = solve_pressure_driven(g, u, FluidParams(Eu_bar=1.0), 1)
    b = solve_pressure_driven(g, u, FluidParams(Eu_bar=2.0), 1)
    c = solve_pressure_driven(g, u, FluidParams(Re=2.0), 1)
    assert np.allclose(b.w.wx, 2 * a.w.wx, atol=1e-13)
    assert np.allclose(c.w.wx, 2 * a.w.wx, atol=1e-13)


def test_obstacle_rotation_symmetry():
    g = build_unit_cell(Obstacle(0.45), 40)
    sols, _ = solve_all(g, PhaseField.constant(g, 0.0, 0.1), FluidParams())
    w1, w2 = sols
    # reflecting x <-> y maps driver 1 onto driver 2
    assert np.allclose(w1.w.wx, w2.w.wy.T, atol=1e-12)
    assert np.allclose(w1.w.wy, w2.w.wx.T, atol=1e-12)


def test_zero_phase_field_ignores_ratios():
    g = build_unit_cell(Cross(0.3), 40)
    u = PhaseField.constant(g, 0.0, 0.1)
    a = solve_pressure_driven(g, u, FluidParams(), 1)
    b = solve_pressure_driven(g, u, FluidParams(M=3.0, R=7.0), 1)
    assert np.array_equal(a.w.wx, b.w.wx)
    assert np.array_equal(a.w.wy, b.w.wy)


@pytest.mark.parametrize("value", [0.0, 0.4, 1.0])
def test_constant_phase_field_gives_zero_surface_solution(value):
    g = build_unit_cell(Obstacle(0.45), 40)
    u = PhaseField.constant(g, value, 0.1)
    s0 = solve_surface_tension(g, u, FluidParams(xi=0.1))
    assert np.abs(s0.w.wx).max() == 0 and np.abs(s0.w.wy).max() == 0
    assert np.abs(s0.pi).max() == 0


def test_surface_forcing_vanishes_for_constant_field():
    g = build_unit_cell(Cross(0.3), 40)
    fx, fy = surface_tension_forcing(g, np.full((40, 40), 0.7), 0.1, 1.0, math.pi / 2)
    assert np.abs(fx).max() == 0 and np.abs(fy).max() == 0


@pytest.fixture(scope="module")
def droplet_case():
    g = build_unit_cell(Obstacle(0.45), 40)
    u = initial_droplet(g, (0.35, 0.3), 0.3, 0.1)
    p = FluidParams(M=2.0, R=3.0, xi=0.1)
    solver = CellProblemSolver(g, u, p)
    return g, u, p, solver


def test_mass_and_gauge(droplet_case):
    g, u, p, solver = droplet_case
    for sol in (solver.pressure_driven(1), solver.pressure_driven(2), solver.surface_tension()):
        rho = p.rho(u.values)
        assert np.abs(sol.w.divergence(rho)[g.fluid]).max() <= 1e-9
        assert abs(sol.pi[g.fluid].mean()) <= 1e-12
        assert sol.residuals["momentum"] <= 1e-10


def test_pressure_constant_shift_invariance(droplet_case):
    g, u, p, solver = droplet_case
    sol = solver.pressure_driven(1)
    n = g.n
    fx = np.full((n, n), p.Eu_bar)
    fy = np.zeros((n, n))
    r0 = solver.momentum_residual(sol, fx, fy)
    shifted = type(sol)(sol.w, sol.pi + 3.7 * g.fluid, sol.driver)
    assert solver.momentum_residual(shifted, fx, fy) == pytest.approx(r0, abs=1e-12)


@settings(max_examples=5, deadline=None)
@given(gx=st.floats(-2, 2), gy=st.floats(-2, 2))
def test_superposition(droplet_case, gx, gy):
    g, u, p, solver = droplet_case
    w1, w2 = solver.pressure_driven(1), solver.pressure_driven(2)
    w0 = solver.surface_tension()
    tx, ty = solver.surface_forcing()
    direct = solver.solve(-p.Eu_bar * gx - tx, -p.Eu_bar * gy - ty)
    comb_x = -gx * w1.w.wx - gy * w2.w.wx - w0.w.wx
    comb_y = -gx * w1.w.wy - gy * w2.w.wy - w0.w.wy
    assert np.abs(direct.w.wx - comb_x).max() <= 1e-8
    assert np.abs(direct.w.wy - comb_y).max() <= 1e-8


@pytest.mark.parametrize("kind", [Obstacle(0.45), Cross(0.3), Obstacle(0.3)])
def test_single_phase_permeability_spd(kind):
    g = build_unit_cell(kind, 40)
    sols, _ = solve_all(g, PhaseField.constant(g, 0.0, 0.1), FluidParams())
    K = np.array([[s.w.centers()[i][g.fluid].sum() for s in sols] for i in range(2)]) * g.cell_volume / g.pore_volume
    assert np.abs(K - K.T).max() <= 1e-8
    assert np.all(np.linalg.eigvalsh(0.5 * (K + K.T)) > 0)


def test_empty_geometry_rejected():
    g = build_unit_cell(Empty(), 16)
    with pytest.raises(CellSolverError):
        CellProblemSolver(g, PhaseField.constant(g, 0.0, 0.2), FluidParams())


def test_bad_driver():
    g = build_unit_cell(Obstacle(0.45), 20)
    s = CellProblemSolver(g, PhaseField.constant(g, 0.0, 0.2), FluidParams())
    with pytest.raises(ValueError):
        s.pressure_driven(3)


@pytest.mark.parametrize("bad", [dict(M=0), dict(R=-1), dict(Ca=0), dict(slip_length=-0.1), dict(xi=0)])
def test_fluid_params_validation(bad):
    with pytest.raises(ValueError):
        FluidParams(**bad)


def test_cell_velocity_helpers():
    g = build_unit_cell(Channel(0.5), 16)
    v = CellVelocity.uniform(g, 1.0, 0.0)
    vx, vy = v.centers()
    assert np.all(vx[g.fluid] == 1.0) and np.all(vx[g.solid] == 0.0)
    assert np.abs(v.divergence()).max() == 0
    w = v + v.scaled(2.0)
    assert np.all(w.wx[g.xface_active()] == 3.0)
    assert np.all(CellVelocity.zeros(g).wx == 0)
