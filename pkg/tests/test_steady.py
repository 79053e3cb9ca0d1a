import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lagrangian_ssr.errors import SolverError
from lagrangian_ssr.model import SystemModel
from lagrangian_ssr.network import Branch, InfiniteBus, NetworkSpec
from lagrangian_ssr.steady import (
    _wrap_common,
    dispatch_torques,
    initial_state_stationary,
    residual,
    solve_equilibrium,
    terminal_quantities,
)


def test_dispatch_reproduces_terminal_targets(fbm, stable):
    for sc in (fbm, stable):
        tq = terminal_quantities(sc.model, sc.equilibrium)
        d = sc.config.dispatch
        assert tq.voltage == pytest.approx(d.v_ab, rel=1e-8)
        assert tq.current == pytest.approx(d.i_ab, rel=1e-8)
        assert tq.pf == pytest.approx(0.9, rel=1e-8)
        assert tq.q > 0.0  # lagging: the machine exports reactive power


def test_power_balance_at_equilibrium(fbm):
    # the prime-mover power equals the electrical power plus losses in the shaft damping
    m, eq = fbm.model, fbm.equilibrium
    tq = terminal_quantities(m, eq)
    p_mech = m.omega * eq.torque.sum() - m.omega * m.D_offset.sum()
    assert p_mech == pytest.approx(tq.p, rel=1e-8)


def test_torque_split_follows_turbines(fbm):
    t = fbm.equilibrium.torque
    np.testing.assert_allclose(t / t.sum(), [0.3, 0.26, 0.22, 0.22, 0.0, 0.0], atol=1e-15)


def test_residual_and_history(fbm):
    eq = fbm.equilibrium
    r = residual(fbm.model, eq.phi, eq.delta, eq.torque)
    assert np.abs(r[:10]).max() < 1e-8 * np.abs(fbm.model.I_ss).max()
    assert np.abs(r[10:]).max() < 1e-8 * np.abs(eq.torque).max()
    assert eq.history[-1] == eq.residual_norm


def test_resolve_from_cold_start(fbm):
    eq = solve_equilibrium(fbm.model)
    np.testing.assert_allclose(eq.delta, fbm.equilibrium.delta, atol=1e-9)
    np.testing.assert_allclose(eq.phi, fbm.equilibrium.phi, rtol=1e-8, atol=1e-8)


def test_excess_torque_has_no_equilibrium(stable):
    m = stable.model.with_torque(stable.equilibrium.torque * 20.0)
    with pytest.raises(SolverError) as info:
        solve_equilibrium(m)
    assert info.value.residual is not None


def test_invalid_power_factor(fbm):
    with pytest.raises(ValueError):
        dispatch_torques(fbm.model, 1.0, 1.0, 1.5)


def test_network_only_equilibrium():
    spec = NetworkSpec(2, (Branch("L", 1, 2, 1e-2), Branch("R", 2, 0, 10.0)), InfiniteBus(1e3, 1.0, 1))
    m = SystemModel(spec)
    eq = solve_equilibrium(m)
    np.testing.assert_allclose(m.S_xy @ eq.phi, m.I_ss, atol=1e-9 * np.abs(m.I_ss).max())
    # phasor nodal solve, including the 1 nF regularizing capacitance on both nodes
    w = m.omega
    yl = 1.0 / (1j * w * 1e-2)
    yc = 1j * w * 1e-9
    y = np.array([[1.0 + yc + yl, -yl], [-yl, yl + 0.1 + yc]])
    u = np.linalg.solve(y, [1e3, 0.0])
    phi2 = complex(eq.phi[2], eq.phi[3])
    assert 1j * w * phi2 == pytest.approx(u[1], rel=1e-9)


def test_initial_state_matches_frame_map(fbm):
    m, eq = fbm.model, fbm.equilibrium
    for t0 in (0.0, 0.31):
        np.testing.assert_allclose(initial_state_stationary(m, eq, t0), m.to_stationary(t0, eq.state()), atol=1e-9)


@given(st.lists(st.floats(-50.0, 50.0), min_size=1, max_size=6), st.data())
def test_wrap_common_shift(delta, data):
    d = np.array(delta)
    gen = data.draw(st.integers(0, d.size - 1))
    w = _wrap_common(d, gen)
    assert -np.pi < w[gen] <= np.pi + 1e-12
    np.testing.assert_allclose(np.diff(w), np.diff(d), atol=1e-12)
    k = (d[gen] - w[gen]) / (2 * np.pi)
    assert k == pytest.approx(round(k), abs=1e-9)


def test_q_axis_rotor_fluxes_coincide(fbm):
    # damper currents vanish at steady state, so both q-axis rotor windings see only the mutual flux
    phi = fbm.equilibrium.phi[fbm.model.machine.index]
    assert phi[4] == pytest.approx(phi[5], rel=1e-9)
    assert phi[4] == pytest.approx(-298.0, rel=0.01)
