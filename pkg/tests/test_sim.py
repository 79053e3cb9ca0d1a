import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from lagrangian_ssr.errors import EstimationError
from lagrangian_ssr.model import SystemModel
from lagrangian_ssr.network import Branch, InfiniteBus, NetworkSpec
from lagrangian_ssr.sim import (
    derive,
    energy_audit,
    envelope_growth,
    integrate,
    to_stationary,
    write_trajectory_csv,
    zero_crossing_frequency,
)


def rlc():
    return SystemModel(NetworkSpec(1, (Branch("C", 1, 0, 1e-3), Branch("L", 1, 0, 1e-2), Branch("R", 1, 0, 5.0))))


def exact(m, x0, t):
    return expm(m.jacobian(x0, "alphabeta") * t) @ x0


X0 = np.array([100.0, -50.0, 0.2, 0.1])


def test_trap_matches_exponential():
    m = rlc()
    tr = integrate(m, X0, "alphabeta", "trap", 1e-5, 0.02)
    assert np.abs(tr.states[-1] - exact(m, X0, 0.02)).max() < 1e-4 * np.abs(X0).max()


@pytest.mark.parametrize("method,order", [("trap", 2), ("rk4", 4)])
def test_order_of_accuracy(method, order):
    m = rlc()
    ref = exact(m, X0, 0.02)
    errs = [np.abs(integrate(m, X0, "alphabeta", method, h, 0.02).states[-1] - ref).max() for h in (2e-4, 1e-4)]
    assert errs[0] / errs[1] == pytest.approx(2.0**order, rel=0.1)


def test_flat_trajectory_from_equilibrium(stable):
    # the equilibrium is a fixed point of the synchronous-frame equations
    m, eq = stable.model, stable.equilibrium
    tr = integrate(m, eq.state(), "xy", "trap", 1e-3, 0.2)
    x = tr.states
    for s in (m.sl_w, m.sl_p, m.sl_t):
        scale = max(np.abs(eq.state()[s]).max(), 1.0)
        assert np.abs(x[:, s] - eq.state()[s]).max() < 1e-8 * scale
    assert np.abs(x[:, m.sl_v]).max() < 1e-8 * m.omega * np.abs(eq.phi).max()


def test_stationary_run_follows_synchronous_rotation(fbm):
    m, eq = fbm.model, fbm.equilibrium
    tr = integrate(m, m.to_stationary(0.0, eq.state()), "alphabeta", "trap", 1e-5, 0.01)
    back = m.to_synchronous(tr.times, tr.states)
    assert np.abs(back[:, m.sl_p] - eq.phi).max() < 1e-6 * np.abs(eq.phi).max()


def test_rk4_diverges_on_stiff_model(fbm):
    m, eq = fbm.model, fbm.equilibrium
    tr = integrate(m, eq.state(), "xy", "rk4", 1e-5, 0.01)
    assert tr.divergent and tr.last_good < 1000


@pytest.mark.parametrize(
    "kw", [dict(frame="abc"), dict(method="euler"), dict(h=0.0), dict(t_end=0.0), dict(decimation=0)]
)
def test_argument_checks(kw):
    args = dict(frame="alphabeta", method="trap", h=1e-4, t_end=0.01)
    args.update(kw)
    with pytest.raises(ValueError):
        integrate(rlc(), X0, **args)


def test_decimation_keeps_every_nth():
    m = rlc()
    full = integrate(m, X0, "alphabeta", "trap", 1e-4, 0.01)
    dec = integrate(m, X0, "alphabeta", "trap", 1e-4, 0.01, decimation=10)
    np.testing.assert_array_equal(dec.states, full.states[::10])
    np.testing.assert_allclose(dec.times, full.times[::10])


@settings(max_examples=25)
@given(st.floats(-3.0, 3.0), st.floats(5.0, 40.0))
def test_envelope_growth_recovers_rate(sigma, f):
    dt = 1e-4
    t = np.arange(0, 1.0, dt)
    s = np.exp(sigma * t) * np.sin(2 * np.pi * f * t + 0.3)
    assert envelope_growth(s, dt, f) == pytest.approx(sigma, abs=0.02 * max(abs(sigma), 0.5))
    assert zero_crossing_frequency(s, dt) == pytest.approx(f, rel=2e-3)


def test_estimators_need_cycles():
    dt = 1e-3
    s = np.sin(2 * np.pi * 10 * np.arange(0, 0.2, dt))
    with pytest.raises(EstimationError):
        envelope_growth(s, dt, 10.0)
    with pytest.raises(EstimationError):
        zero_crossing_frequency(np.ones(100), dt)


def test_energy_audit_linear_network():
    spec = NetworkSpec(2, (Branch("L", 1, 2, 1e-2), Branch("C", 2, 0, 1e-4), Branch("R", 2, 0, 20.0)), InfiniteBus(1e3, 1.0, 1))
    m = SystemModel(spec)
    tr = integrate(m, np.zeros(m.n), "alphabeta", "trap", 1e-5, 0.05)
    audit = energy_audit(m, tr)
    assert audit.peak_power > 0
    assert audit.relative < 1e-8


def test_energy_audit_frame_independent(stable):
    m, eq = stable.model, stable.equilibrium
    x0 = eq.state()
    x0[m.sl_w] += 0.5
    xy = integrate(m, x0, "xy", "trap", 1e-5, 0.01)
    assert energy_audit(m, xy).relative < 1e-4


def test_derived_channels_at_equilibrium(fbm):
    m, eq = fbm.model, fbm.equilibrium
    tr = to_stationary(m, integrate(m, eq.state(), "xy", "trap", 1e-4, 0.01))
    ch = derive(tr, m)
    amp = ch.amplitudes
    np.testing.assert_allclose(amp, np.broadcast_to(amp[0], amp.shape), rtol=1e-6)
    np.testing.assert_allclose(ch.omega_u, m.omega, rtol=1e-6)
    np.testing.assert_allclose(ch.speeds, m.omega, rtol=1e-9)
    np.testing.assert_allclose(ch.powers.sum(axis=1), m.omega * eq.torque.sum(), rtol=1e-9)


def test_trajectory_csv(tmp_path, stable):
    m, eq = stable.model, stable.equilibrium
    tr = integrate(m, eq.state(), "xy", "trap", 1e-3, 0.005)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trajectory_csv(tr, m, p1)
    write_trajectory_csv(tr, m, p2)
    assert p1.read_bytes() == p2.read_bytes()
    rows = list(csv.reader(open(p1)))
    assert rows[0][0] == "time" and rows[0][1] == "dphi_1x"
    assert len(rows) == 1 + 6  # header and samples at 0..5 ms
    assert all(len(r) == len(rows[0]) for r in rows)
