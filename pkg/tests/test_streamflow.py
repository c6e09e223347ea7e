import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from porehom.geometry import Channel, Cross, Empty, Obstacle, build_unit_cell
from porehom.phasefield import PhaseField
from porehom.stokescell import CellVelocity, FluidParams, solve_pressure_driven
from porehom.streamflow import boundary_seeds, interpolate, net_flow_mask, trace_streamline


def test_uniform_field_straight_wrap():
    g = build_unit_cell(Empty(), 32)
    v = CellVelocity.uniform(g, 1.0, 0.0)
    sl = trace_streamline(g, v, (0.1, 0.5))
    assert sl.reason == "wrap" and sl.wraps == 1
    assert np.allclose(sl.points[:, 1], 0.5)
    assert sl.points[-1, 0] - 0.1 >= 1.0
    back = trace_streamline(g, v, (0.1, 0.5), direction=-1)
    assert back.reason == "wrap" and back.wraps == -1


def test_zero_field_stagnates():
    g = build_unit_cell(Empty(), 16)
    sl = trace_streamline(g, CellVelocity.zeros(g), (0.3, 0.3))
    assert sl.reason == "stagnation"
    assert sl.length == 0.0


def test_seed_in_solid_rejected():
    g = build_unit_cell(Obstacle(0.45), 20)
    with pytest.raises(ValueError):
        trace_streamline(g, CellVelocity.zeros(g), (0.5, 0.5))


def test_max_len_on_transverse_field():
    # flow along y never wraps along x
    g = build_unit_cell(Empty(), 16)
    sl = trace_streamline(g, CellVelocity.uniform(g, 0.0, 1.0), (0.2, 0.2), max_len=3.0, axis=1)
    assert sl.reason == "max_len"
    assert sl.length == pytest.approx(3.0, abs=g.h)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), x=st.floats(0, 1), y=st.floats(0, 1))
def test_interpolation_exact_for_constants(a, b, x, y):
    g = build_unit_cell(Empty(), 8)
    v = CellVelocity.uniform(g, a, b)
    out = interpolate(v, np.array([[x, y]]))
    assert np.allclose(out, [[a, b]])


def test_interpolation_linear_in_x_for_x_component():
    n = 16
    g = build_unit_cell(Empty(), n)
    # wx(i, j) = i: nodes at x = i h; linear between nodes away from the seam
    wx = np.tile(np.arange(n, dtype=float)[:, None], (1, n))
    v = CellVelocity(g, wx, np.zeros((n, n)))
    pts = np.array([[0.3, 0.4], [0.55, 0.9]])
    assert np.allclose(interpolate(v, pts)[:, 0], pts[:, 0] * n)


@pytest.fixture(scope="module")
def poiseuille():
    g = build_unit_cell(Channel(0.5), 32)
    sol = solve_pressure_driven(g, PhaseField.constant(g, 0.0, 0.1), FluidParams(), 1)
    return g, sol.w


def test_channel_poiseuille_full_mask(poiseuille):
    g, w = poiseuille
    m = net_flow_mask(g, w, 1)
    assert np.array_equal(m.cells, g.fluid)
    assert m.count == g.n_fluid


def test_unidirectional_uniform_field_full_mask():
    g = build_unit_cell(Channel(0.4), 20)
    m = net_flow_mask(g, CellVelocity.uniform(g, 1.0, 0.0), 1)
    assert np.array_equal(np.asarray(m), g.fluid)


def test_zero_field_empty_mask():
    g = build_unit_cell(Cross(0.3), 20)
    assert net_flow_mask(g, CellVelocity.zeros(g), 1).count == 0


def test_boundary_seeds_are_active_faces():
    g = build_unit_cell(Cross(0.3), 20)
    s1 = boundary_seeds(g, 1)
    s2 = boundary_seeds(g, 2)
    assert len(s1) == 6 and np.all(s1[:, 0] == 0)
    assert len(s2) == 6 and np.all(s2[:, 1] == 0)


@pytest.fixture(scope="module")
def cross_flow():
    g = build_unit_cell(Cross(0.3), 60)
    sol = solve_pressure_driven(g, PhaseField.constant(g, 0.0, 0.1), FluidParams(), 1)
    return g, sol.w


def test_dead_end_arm_never_wraps(cross_flow):
    g, w = cross_flow
    sl = trace_streamline(g, w, (0.45, 0.9), max_len=20.0)
    assert sl.reason != "wrap"
    assert np.abs(sl.points[:, 0] - 0.45).max() < 0.5


def test_cross_mask_excludes_arm_ends(cross_flow):
    g, w = cross_flow
    m = net_flow_mask(g, w, 1)
    assert m.count < g.n_fluid
    X, Y = g.cell_centers()
    far_arm = g.fluid & (np.abs(Y - 0.5) > 0.45)
    assert not (m.cells & far_arm).any()
    # the horizontal through-channel is fully marked
    assert m.cells[g.fluid & (np.abs(Y - 0.5) < 0.15)].all()


def test_mask_stable_under_step_refinement(cross_flow):
    g, w = cross_flow
    a = net_flow_mask(g, w, 1).cells
    b = net_flow_mask(g, w, 1, step=0.25 * g.h).cells
    assert (a ^ b).sum() <= 0.02 * g.n_fluid


def test_masked_diagonal_non_negative(cross_flow):
    from porehom.effective import mobility_tensors

    g, w = cross_flow
    from porehom.stokescell import solve_pressure_driven as spd

    w2 = spd(g, PhaseField.constant(g, 0.0, 0.1), FluidParams(), 2)
    sols = [type(w2)(w, np.zeros((g.n, g.n)), 1), w2]
    masks = [net_flow_mask(g, s.w, j + 1) for j, s in enumerate(sols)]
    K, _ = mobility_tensors(g, PhaseField.constant(g, 1.0, 0.1), sols, masks)
    assert K[0, 0] >= -1e-12 and K[1, 1] >= -1e-12
