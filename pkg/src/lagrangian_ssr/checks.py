"""Self-consistency oracles shared by the ``verify`` command and the test suite.

Each function returns measured numbers; thresholds live with the callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Scenario, SimulationSettings
from .emtp_oracle import dommel_run
from .machine import GammaDq, gamma, gamma_similarity
from .model import SystemModel
from .sim import energy_audit, integrate
from .smallsignal import ModalResult, linearize, modal, project_physical
from .steady import Equilibrium


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    limit: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value < self.limit)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.value:.3e} (limit {self.limit:.1e})"


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.abs(b).max()
    return float(np.abs(a - b).max() / scale) if scale > 0 else float(np.abs(a - b).max())


# -- machine calculus ---------------------------------------------------------


def gamma_calculus_errors(g: GammaDq, thetas, step: float = 1e-5) -> tuple[float, float, float]:
    """Worst relative errors of Gamma', Gamma'' against central differences and
    of Gamma against the rotation similarity."""
    e1 = e2 = es = 0.0
    for th in thetas:
        fd1 = (gamma(th + step, g) - gamma(th - step, g)) / (2.0 * step)
        fd2 = (gamma(th + step, g, 1) - gamma(th - step, g, 1)) / (2.0 * step)
        e1 = max(e1, _rel(gamma(th, g, 1), fd1))
        e2 = max(e2, _rel(gamma(th, g, 2), fd2))
        es = max(es, _rel(gamma(th, g), gamma_similarity(th, g)))
    return e1, e2, es


def torque_gradient_error(m: SystemModel, psis, thetas, step: float = 1e-6) -> float:
    """Worst relative gap between the machine torque and -dE/dtheta by central differences."""
    mach = m.machine
    worst = 0.0
    for psi, th in zip(psis, thetas):
        fd = -(mach.field_energy(psi, th + step) - mach.field_energy(psi, th - step)) / (2.0 * step)
        te = mach.torque(psi, th)
        worst = max(worst, abs(te - fd) / max(abs(te), abs(fd), 1e-300))
    return worst


# -- linearization ------------------------------------------------------------


def fd_jacobian(m: SystemModel, x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the synchronous-frame right-hand side."""
    scale = np.ones(m.n)
    for s in (m.sl_v, m.sl_w, m.sl_p, m.sl_t):
        blk = np.abs(x[s])
        scale[s] = max(blk.max(), 1.0) if blk.size else 1.0
    jac = np.empty((m.n, m.n))
    for j in range(m.n):
        dx = rel_step * scale[j]
        xp, xm = x.copy(), x.copy()
        xp[j] += dx
        xm[j] -= dx
        jac[:, j] = (m.rhs_synchronous(xp) - m.rhs_synchronous(xm)) / (2.0 * dx)
    return jac


def linearization_error(m: SystemModel, eq: Equilibrium) -> float:
    """Row-scaled max relative gap between the assembled A and the FD Jacobian."""
    a = linearize(m, eq).A
    fd = fd_jacobian(m, eq.state())
    rows = np.maximum(np.abs(a).max(axis=1), 1e-300)
    return float((np.abs(a - fd).max(axis=1) / rows).max())


# -- perturbed initial states -------------------------------------------------


def perturbation(m: SystemModel, eq: Equilibrium, mr: ModalResult, kind: str, amplitude: float,
                 mode_hz: float = 0.0) -> np.ndarray:
    """Synchronous-frame perturbation on the physical modal subspace."""
    if kind == "none" or amplitude == 0.0:
        return np.zeros(m.n)
    if kind == "mode":
        return amplitude * mr.vectors[:, mr.find(mode_hz)].real
    if kind == "speed":
        dx = np.zeros(m.n)
        dx[m.sl_w.start + m.gen] = amplitude
        return project_physical(mr, dx)
    raise ValueError(f"unknown perturbation {kind!r}")


def initial_state(sc: Scenario, settings: SimulationSettings | None = None, mr: ModalResult | None = None):
    """Perturbed initial state in the configured frame at t = 0."""
    s = settings or sc.config.simulation
    m, eq = sc.model, sc.equilibrium
    if mr is None and s.perturbation != "none" and s.amplitude > 0.0:
        mr = modal(linearize(m, eq))
    x = eq.state() + perturbation(m, eq, mr, s.perturbation, s.amplitude, s.mode_hz)
    return m.to_stationary(0.0, x) if s.frame == "alphabeta" else x


# -- frames, energy, EMTP -----------------------------------------------------


def block_discrepancy(m: SystemModel, a: np.ndarray, b: np.ndarray) -> dict:
    """Max |a - b| per state block, relative to the block's max |b| over the run."""
    out = {}
    for name, s in (("v", m.sl_v), ("w", m.sl_w), ("p", m.sl_p), ("t", m.sl_t)):
        ref = np.abs(b[..., s]).max() if b[..., s].size else 0.0
        out[name] = float(np.abs(a[..., s] - b[..., s]).max() / ref) if ref > 0 else 0.0
    return out


def frame_discrepancy(m: SystemModel, x0_xy: np.ndarray, h: float, t_end: float, method: str = "trap") -> dict:
    ab = integrate(m, m.to_stationary(0.0, x0_xy), "alphabeta", method, h, t_end)
    xy = integrate(m, x0_xy, "xy", method, h, t_end)
    return block_discrepancy(m, m.to_stationary(xy.times, xy.states), ab.states)


def dommel_discrepancy(m: SystemModel, x0_ab: np.ndarray, h: float, t_end: float) -> float:
    """Node-voltage discrepancy between the simultaneous Dommel run and the trapezoidal integrator."""
    lag = integrate(m, x0_ab, "alphabeta", "trap", h, t_end, tol=1e-13)
    dom = dommel_run(m, x0_ab, h, t_end, "simultaneous")
    node = slice(0, 2 * m.n_nodes)
    return _rel(dom.states[:, node], lag.states[:, node])


def slow_error(m: SystemModel, x: np.ndarray, ref: np.ndarray, ref_run: np.ndarray) -> float:
    """Largest flux, speed or angle error, each relative to that block's max over the reference run."""
    worst = 0.0
    for s in (m.sl_w, m.sl_p, m.sl_t):
        scale = np.abs(ref_run[:, s]).max()
        if scale > 0:
            worst = max(worst, float(np.abs(x[s] - ref[s]).max() / scale))
    return worst


def coupling_orders(m: SystemModel, x0_ab: np.ndarray, steps, t_end: float, ref_step: float) -> dict:
    """Error ratios on successive step halvings for both Dommel couplings.

    Errors are measured at t_end against a fine-step trapezoidal run, on the
    flux, speed and angle blocks.  Node voltages are left out: with the
    delayed exchange they carry an undamped oscillation of the stiff
    parasitic modes that does not shrink with the step.
    """
    ref = integrate(m, x0_ab, "alphabeta", "trap", ref_step, t_end, tol=1e-13)
    out = {}
    for coupling in ("alternating", "simultaneous"):
        errs = []
        for h in steps:
            run = dommel_run(m, x0_ab, h, t_end, coupling)
            errs.append(slow_error(m, run.states[-1], ref.states[-1], ref.states))
        errs = np.array(errs)
        out[coupling] = (errs, errs[:-1] / errs[1:])
    return out


def voltage_delay_artifact(m: SystemModel, x0_ab: np.ndarray, h: float, t_end: float) -> float:
    """Max node-voltage gap between alternating and simultaneous Dommel runs, relative."""
    alt = dommel_run(m, x0_ab, h, t_end, "alternating")
    sim = dommel_run(m, x0_ab, h, t_end, "simultaneous")
    node = slice(0, 2 * m.n_nodes)
    return _rel(alt.states[:, node], sim.states[:, node])


# -- convergence to equilibrium -----------------------------------------------


def state_distance(m: SystemModel, states_xy: np.ndarray, eq: Equilibrium) -> np.ndarray:
    """Block-scaled Euclidean distance to the equilibrium (synchronous frame)."""
    x_eq = eq.state()
    scale = np.ones(m.n)
    for s in (m.sl_v, m.sl_w, m.sl_p, m.sl_t):
        if x_eq[s].size:
            scale[s] = max(np.abs(x_eq[s]).max(), 1.0)
    return np.linalg.norm((states_xy - x_eq) / scale, axis=-1)


def windowed_envelope(dist: np.ndarray, dt: float, window: float) -> np.ndarray:
    """Max of ``dist`` over consecutive windows (whole windows only)."""
    n = max(int(round(window / dt)), 1)
    k = dist.size // n
    return dist[: k * n].reshape(k, n).max(axis=1)


def run_verify(sc: Scenario, quick: bool = True) -> list:
    """Oracle suite on one scenario; returns CheckResults."""
    m, eq = sc.model, sc.equilibrium
    rng = np.random.default_rng(12345)
    out = []
    if m.machine is not None:
        e1, e2, es = gamma_calculus_errors(m.machine.gdq, rng.uniform(-np.pi, np.pi, 50))
        out += [
            CheckResult("gamma first derivative vs FD", e1, 1e-6),
            CheckResult("gamma second derivative vs FD", e2, 1e-6),
            CheckResult("gamma vs rotation similarity", es, 1e-12),
        ]
        idx = m.machine.index
        psis = []
        for _ in range(100):
            psi = np.zeros(m.n_e)
            psi[idx] = rng.normal(size=idx.size) * np.abs(eq.phi[idx]).max()
            psis.append(psi)
        out.append(CheckResult("torque vs energy gradient", torque_gradient_error(m, psis, rng.uniform(-np.pi, np.pi, 100)), 1e-6))
    out.append(CheckResult("equilibrium residual", eq.residual_norm, 1e-8))
    out.append(CheckResult("A vs FD Jacobian", linearization_error(m, eq), 1e-5))
    mr = modal(linearize(m, eq))
    dx = perturbation(m, eq, mr, "speed", 1e-2) if m.n_m else np.zeros(m.n)
    x0 = eq.state() + dx
    t_end = 0.02 if quick else 0.2
    fd = frame_discrepancy(m, x0, 4e-6, t_end)
    out.append(CheckResult("frame equivalence", max(fd.values()), 1e-6))
    x0_ab = m.to_stationary(0.0, x0)
    traj = integrate(m, x0_ab, "alphabeta", "trap", 1e-5, t_end)
    out.append(CheckResult("energy audit", energy_audit(m, traj).relative, 1e-4))
    out.append(CheckResult("Dommel vs trapezoidal", dommel_discrepancy(m, x0_ab, 1e-5, t_end), 1e-6))
    return out
