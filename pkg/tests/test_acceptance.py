"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import time

import numpy as np
import pytest

from conftest import record
from lagrangian_ssr import checks
from lagrangian_ssr.config import SimulationSettings
from lagrangian_ssr.model import SystemModel
from lagrangian_ssr.network import Branch, InfiniteBus, NetworkSpec, short_series_capacitors
from lagrangian_ssr.shaft import torsional_frequencies
from lagrangian_ssr.sim import energy_audit, envelope_growth, integrate, zero_crossing_frequency
from lagrangian_ssr.smallsignal import linearize, modal, verdict
from lagrangian_ssr.steady import dispatch_torques

TORSIONAL_COUPLED = (15.97, 20.13, 25.52, 32.27, 47.46)
TORSIONAL_NOMINAL = (15.71, 20.21, 25.55, 32.29, 47.46)


def _within(value, target, rel):
    return abs(value - target) <= rel * abs(target)


def test_criterion_01_machine_calculus(fbm, rng):
    t = time.perf_counter()
    e1, e2, es = checks.gamma_calculus_errors(fbm.model.machine.gdq, rng.uniform(-np.pi, np.pi, 50))
    dt = time.perf_counter() - t
    ok = e1 < 1e-6 and e2 < 1e-6 and es < 1e-12 and dt < 1.0
    record(1, ok, f"Gamma' {e1:.2e}, Gamma'' {e2:.2e} vs FD (< 1e-6); similarity {es:.2e} (< 1e-12); {dt:.2f} s")
    assert ok


def test_criterion_02_torque_energy_gradient(fbm, rng):
    m = fbm.model
    idx = m.machine.index
    scale = np.abs(fbm.equilibrium.phi[idx]).max()
    psis = []
    for _ in range(100):
        psi = np.zeros(m.n_e)
        psi[idx] = rng.normal(size=idx.size) * scale
        psis.append(psi)
    t = time.perf_counter()
    err = checks.torque_gradient_error(m, psis, rng.uniform(-np.pi, np.pi, 100))
    dt = time.perf_counter() - t
    ok = err < 1e-6 and dt < 1.0
    record(2, ok, f"T_E vs -dE/dtheta worst relative {err:.2e} (< 1e-6); {dt:.2f} s")
    assert ok


def test_criterion_03_equilibrium():
    from lagrangian_ssr.config import load_scenario

    t = time.perf_counter()
    fbm = load_scenario("fbm")
    stable = load_scenario("stable_smib")
    dt = time.perf_counter() - t
    eq = fbm.equilibrium
    d5 = eq.delta[fbm.model.gen]
    psi_f = eq.phi[fbm.model.machine.index[2]]
    res = max(eq.residual_norm, stable.equilibrium.residual_norm)
    ok_res = res < 1e-8
    ok_d5 = _within(d5, -0.53866, 0.05)
    ok_pf = _within(psi_f, 467.94, 0.05)
    ok = ok_res and ok_d5 and ok_pf and dt < 5.0
    record(
        3,
        ok,
        f"residual {res:.1e} (< 1e-8); delta_5 {d5:.5f} ({100 * (d5 / -0.53866 - 1):+.2f}%), "
        f"Psi_f {psi_f:.2f} ({100 * (psi_f / 467.94 - 1):+.2f}%) [parameter-sourcing-dependent]; {dt:.2f} s",
    )
    assert ok


def test_criterion_04_linearization(fbm, stable):
    t = time.perf_counter()
    errs = [checks.linearization_error(sc.model, sc.equilibrium) for sc in (fbm, stable)]
    dt = time.perf_counter() - t
    ok = max(errs) < 1e-5 and dt < 10.0
    record(4, ok, f"A vs FD Jacobian: fbm {errs[0]:.2e}, stable {errs[1]:.2e} (< 1e-5); {dt:.2f} s")
    assert ok


def test_criterion_05_modal_reproduction(fbm):
    t = time.perf_counter()
    m, eq = fbm.model, fbm.equilibrium
    mr = modal(linearize(m, eq))
    phys = mr.physical()
    lam = mr.eigenvalues
    unstable = [k for k in phys if lam[k].real > 1e-6]
    upper = [k for k in unstable if lam[k].imag > 0]
    one_pair = len(unstable) == 2 and len(upper) == 1 and np.isclose(lam[unstable[0]], np.conj(lam[unstable[1]]))
    f_ssr = mr.frequencies[upper[0]] if upper else np.nan
    ok_ssr = one_pair and _within(f_ssr, 19.64, 0.05)

    torsional = []
    for target in TORSIONAL_COUPLED:
        k = mr.find(target)
        torsional.append(mr.frequencies[k])
    ok_tors = all(_within(f, g, 0.05) for f, g in zip(torsional, TORSIONAL_COUPLED))
    nominal, _ = torsional_frequencies(m.shaft)
    ok_nom = nominal.size == 5 and all(_within(f, g, 0.02) for f, g in zip(nominal, TORSIONAL_NOMINAL))

    # removing the series capacitor must give a stable verdict
    spec2, mp2 = short_series_capacitors(m.spec, m.machine_params)
    m2 = SystemModel(spec2, mp2, m.shaft_params)
    d = fbm.config.dispatch
    disp = dispatch_torques(m2, d.v_ab, d.i_ab, d.pf)
    mr2 = modal(linearize(disp.model, disp.equilibrium))
    flips = verdict(mr).kind == "Unstable" and verdict(mr2).kind == "AsymptoticallyStable"
    dt = time.perf_counter() - t
    ok = ok_ssr and ok_tors and ok_nom and flips and dt < 10.0
    record(
        5,
        ok,
        f"one unstable pair {one_pair} at {f_ssr:.3f} Hz (Re {lam[upper[0]].real if upper else np.nan:.4f}); "
        f"torsional {', '.join(f'{f:.2f}' for f in torsional)} Hz; nominal {', '.join(f'{f:.2f}' for f in nominal)} Hz; "
        f"verdict without capacitor {verdict(mr2).kind}; {dt:.2f} s",
    )
    assert ok


def test_criterion_06_eigen_time_domain(fbm, fbm_modes):
    m, eq, mr = fbm.model, fbm.equilibrium, fbm_modes
    k = mr.find(19.64)
    lam = mr.eigenvalues[k]
    h, t_end = 1e-5, 1.1
    x0 = eq.state() + checks.perturbation(m, eq, mr, "mode", 1e-6, 19.64)
    t = time.perf_counter()
    traj = integrate(m, x0, "xy", "trap", h, t_end)
    dt = time.perf_counter() - t
    speed = traj.states[:, m.sl_w.start + m.gen] - eq.state()[m.sl_w.start + m.gen]
    f_lam = lam.imag / (2.0 * np.pi)
    cycles = t_end * f_lam
    sigma = envelope_growth(speed, h, f_lam)
    freq = zero_crossing_frequency(speed, h)
    e_sigma = abs(sigma / lam.real - 1.0)
    e_freq = abs(freq / f_lam - 1.0)
    ok = e_sigma < 0.02 and e_freq < 0.005 and cycles >= 20 and dt < 60.0 and not traj.divergent
    record(
        6,
        ok,
        f"growth {sigma:.4f} vs Re {lam.real:.4f} ({100 * e_sigma:.2f}% < 2%); frequency {freq:.4f} vs {f_lam:.4f} Hz "
        f"({100 * e_freq:.3f}% < 0.5%); {cycles:.1f} cycles; {dt:.1f} s",
    )
    assert ok


def test_criterion_07_frame_equivalence(fbm, fbm_modes):
    m, eq = fbm.model, fbm.equilibrium
    x0 = eq.state() + checks.perturbation(m, eq, fbm_modes, "mode", 1e-3, 19.64)
    h = 4e-6
    t = time.perf_counter()
    disc = checks.frame_discrepancy(m, x0, h, 0.2)
    dt = time.perf_counter() - t
    worst = max(disc.values())
    ok = worst < 1e-6 and dt < 30.0
    record(
        7,
        ok,
        "alphabeta vs xy (trap, h = 4 us, 0.2 s): "
        + ", ".join(f"{k} {v:.1e}" for k, v in disc.items())
        + f" (< 1e-6); {dt:.1f} s",
    )
    assert ok


def test_criterion_08_energy_audit(fbm, stable):
    t = time.perf_counter()
    rel = {}
    for name, sc in (("fbm", fbm), ("stable", stable)):
        s = SimulationSettings(frame="alphabeta", perturbation="mode" if name == "fbm" else "speed",
                               amplitude=1e-3 if name == "fbm" else 1.0, mode_hz=19.64)
        x0 = checks.initial_state(sc, s)
        traj = integrate(sc.model, x0, "alphabeta", "trap", 1e-5, 0.2)
        rel[name] = energy_audit(sc.model, traj).relative
    dt = time.perf_counter() - t
    ok = max(rel.values()) < 1e-4 and dt < 30.0
    record(8, ok, f"power-balance residual / peak power: fbm {rel['fbm']:.1e}, stable {rel['stable']:.1e} (< 1e-4); {dt:.1f} s")
    assert ok


def _rlc_model():
    spec = NetworkSpec(
        3,
        (Branch("R", 1, 2, 0.5), Branch("L", 2, 3, 2e-3), Branch("C", 3, 0, 5e-5), Branch("R", 3, 0, 20.0), Branch("C", 1, 0, 1e-6)),
        InfiniteBus(10e3, 1.0, 1),
    )
    return SystemModel(spec)


def test_criterion_09_emtp_equivalence(fbm, fbm_modes):
    t = time.perf_counter()
    rlc = _rlc_model()
    x_rlc = np.zeros(rlc.n)
    lin = checks.dommel_discrepancy(rlc, x_rlc, 1e-5, 0.05)

    m, eq = fbm.model, fbm.equilibrium
    x0 = m.to_stationary(0.0, eq.state() + checks.perturbation(m, eq, fbm_modes, "mode", 1e-3, 19.64))
    full = checks.dommel_discrepancy(m, x0, 1e-5, 0.05)
    orders = checks.coupling_orders(m, x0, (4e-5, 2e-5, 1e-5), 0.05, 1.25e-6)
    alt = orders["alternating"][1]
    sim = orders["simultaneous"][1]
    dt = time.perf_counter() - t
    ok = (
        lin < 1e-8
        and full < 1e-6
        and np.all(np.abs(alt - 2.0) <= 0.4)
        and np.all(np.abs(sim - 4.0) <= 0.8)
        and dt < 60.0
    )
    record(
        9,
        ok,
        f"simultaneous vs trap: RLC {lin:.1e} (< 1e-8), FBM {full:.1e} (< 1e-6); halving ratios "
        f"alternating {', '.join(f'{r:.2f}' for r in alt)} (2 +- 0.4), "
        f"simultaneous {', '.join(f'{r:.2f}' for r in sim)} (4 +- 0.8); {dt:.1f} s",
    )
    assert ok


def test_criterion_10_stable_scenario(stable, stable_modes):
    m, eq = stable.model, stable.equilibrium
    v = verdict(stable_modes)
    s = stable.config.simulation
    x0 = checks.initial_state(stable, s, stable_modes)
    t = time.perf_counter()
    traj = integrate(m, x0, s.frame, s.method, s.h, s.t_end)
    dt = time.perf_counter() - t
    dist = checks.state_distance(m, traj.states, eq)
    # transient: the first 2 s; windows of 1 s cover the electromechanical swing period
    env = checks.windowed_envelope(dist, s.h, 1.0)
    monotone = bool(np.all(np.diff(env[2:]) < 0.0))
    final = dist[-1] / dist[0]
    ok = v.kind == "AsymptoticallyStable" and monotone and final < 1e-4 and dt < 30.0
    record(10, ok, f"verdict {v.kind}; windowed distance monotone {monotone}; final/initial {final:.1e} (< 1e-4); {dt:.1f} s")
    assert ok


@pytest.mark.parametrize("name", ["fbm", "stable_smib"])
def test_bundled_verify_passes(name):
    from lagrangian_ssr.config import load_scenario

    results = checks.run_verify(load_scenario(name))
    assert all(r.passed for r in results), [r.line() for r in results if not r.passed]
