import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagrangian_ssr.checks import fd_jacobian
from lagrangian_ssr.errors import ModelError
from lagrangian_ssr.model import SystemModel
from lagrangian_ssr.network import Branch, InfiniteBus, NetworkSpec
from lagrangian_ssr.shaft import ShaftParams
from lagrangian_ssr.steady import initial_state_stationary


def test_dimensions_and_labels(fbm):
    m = fbm.model
    assert (m.n_e, m.n_m, m.n) == (10, 6, 32)
    ab, xy = m.state_labels("alphabeta"), m.state_labels("xy")
    assert ab[0] == "dpsi_1a" and ab[10] == "dtheta_1" and ab[16] == "psi_1a" and ab[-1] == "theta_6"
    assert xy[0] == "dphi_1x" and xy[21] == "phi_3y" and xy[22] == "phi_f" and xy[-1] == "delta_6"


def test_machine_requires_shaft(fbm):
    with pytest.raises(ModelError):
        SystemModel(fbm.model.spec, fbm.model.machine_params, None)
    with pytest.raises(ModelError):
        fbm.model.with_torque(np.zeros(3))


def test_equilibrium_is_fixed_point(fbm, stable):
    for sc in (fbm, stable):
        f = sc.model.rhs_synchronous(sc.equilibrium.state())
        q = sc.model.n_e + sc.model.n_m
        assert np.abs(f[q:]).max() == 0.0
        # accelerations vanish to the equilibrium tolerance (parasitic rows scale by 1/eps)
        force = sc.model.force("xy", 0.0, sc.equilibrium.state())
        assert np.abs(force[: sc.model.n_e]).max() < 1e-6 * np.abs(sc.model.I_ss).max()


def test_stationary_image_is_a_solution(fbm):
    # x(t) = R(w t) x_eq solves the stationary equations; compare rhs with d/dt
    m, eq = fbm.model, fbm.equilibrium
    for t in (0.0, 0.0123, 0.5):
        h = 1e-7
        dx = (initial_state_stationary(m, eq, t + h) - initial_state_stationary(m, eq, t - h)) / (2 * h)
        f = m.rhs_stationary(t, initial_state_stationary(m, eq, t))
        q = m.n_e + m.n_m
        np.testing.assert_allclose(f[q:], dx[q:], rtol=1e-6, atol=1e-6 * np.abs(dx[q:]).max())
        # electrical accelerations in the stationary frame, relative to the carrier scale
        scale = m.omega**2 * np.abs(eq.phi).max()
        np.testing.assert_allclose(f[: m.n_e], dx[: m.n_e], atol=1e-5 * scale)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.0, 1.0), st.integers(0, 2**31 - 1))
def test_frame_maps_round_trip(fbm_model_small, t, seed):
    m = fbm_model_small
    x = np.random.default_rng(seed).normal(size=m.n) * 100.0
    np.testing.assert_allclose(m.to_synchronous(t, m.to_stationary(t, x)), x, atol=1e-9)


@pytest.fixture(scope="module")
def fbm_model_small():
    spec = NetworkSpec(2, (Branch("L", 1, 2, 1e-3),), InfiniteBus(1e3, 1.0, 1))
    from lagrangian_ssr.machine import MachineParams

    mp = MachineParams.from_standard_data(
        s_base=1e8, v_base=1e4, f_base=60.0, xl=0.1, xd=1.8, xd1=0.3, xd2=0.2,
        xq=1.7, xq1=0.5, xq2=0.25, td01=5.0, td02=0.03, tq01=1.0, tq02=0.05, node=2,
    )
    return SystemModel(spec, mp, ShaftParams(inertia=(1e3, 2e3), stiffness=(1e5,), generator=1), np.array([10.0, 0.0]))


def test_stacked_frame_maps_match_single(fbm):
    m = fbm.model
    rng = np.random.default_rng(3)
    xs = rng.normal(size=(4, m.n))
    ts = rng.uniform(0, 1, 4)
    stacked = m.to_stationary(ts, xs)
    for k in range(4):
        np.testing.assert_allclose(stacked[k], m.to_stationary(ts[k], xs[k]))


@pytest.mark.parametrize("frame", ["xy", "alphabeta"])
def test_jacobian_against_fd(fbm, frame):
    m, eq = fbm.model, fbm.equilibrium
    rng = np.random.default_rng(7)
    x = eq.state() + rng.normal(size=m.n) * 1e-2
    a = m.jacobian(x, frame)
    if frame == "xy":
        fd = fd_jacobian(m, x)
    else:
        fd = np.empty_like(a)
        for j in range(m.n):
            dx = 1e-6 * max(abs(x[j]), 1.0)
            xp, xm = x.copy(), x.copy()
            xp[j] += dx
            xm[j] -= dx
            fd[:, j] = (m.rhs_stationary(0.01, xp) - m.rhs_stationary(0.01, xm)) / (2 * dx)
    rows = np.abs(a).max(axis=1)
    assert (np.abs(a - fd).max(axis=1) / rows).max() < 1e-5


def test_energies_of_rlc():
    spec = NetworkSpec(1, (Branch("C", 1, 0, 2.0), Branch("L", 1, 0, 0.5), Branch("R", 1, 0, 4.0)))
    m = SystemModel(spec)
    x = np.array([3.0, 1.0, 2.0, -1.0])  # rates (voltages), then fluxes
    e = m.energies(0.0, x)
    assert e.kinetic == pytest.approx(0.5 * 2.0 * 10.0)
    assert e.potential == pytest.approx(0.5 * 2.0 * 5.0)
    assert e.dissipation == pytest.approx(10.0 / 4.0)
    assert e.injected == 0.0
