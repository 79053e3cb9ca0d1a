"""Independent EMTP-style solver: trapezoidal companion models (Dommel) per step.

The network is solved as G u = i with node voltages u = dPsi/dt; inductors,
capacitors and the machine windings are replaced by trapezoidal companion
conductances plus history current sources.  The machine and shaft exchange
torque and angle either once per step with a one-step delay ("alternating",
as in classical EMTP programs) or to convergence by block Gauss-Seidel inner
iteration ("simultaneous").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl

from .errors import IntegrationError, ModelError
from .machine import gamma_all
from .model import SystemModel
from .sim import Trajectory

COUPLINGS = ("alternating", "simultaneous")


@dataclass(frozen=True)
class CompanionNetwork:
    """Constant part of the nodal conductance matrix at step h (S)."""

    G: np.ndarray
    h: float

    @classmethod
    def build(cls, m: SystemModel, h: float) -> "CompanionNetwork":
        if not h > 0.0:
            raise ModelError("step must be positive")
        g = 2.0 * m.em.KC / h + m.em.KR + 0.5 * h * m.em.KL
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise ModelError("companion conductance matrix is not positive definite") from exc
        return cls(g, h)


class _Shaft:
    """Trapezoidal companion of J w' + D w + K theta = T + T_E e_gen."""

    def __init__(self, m: SystemModel, h: float):
        self.m, self.h = m, h
        self.lu = sl.lu_factor(m.J + 0.5 * h * m.D + 0.25 * h * h * m.K)

    def solve(self, w0, th0, te0, te1):
        m, h = self.m, self.h
        rhs = m.J @ w0 + 0.5 * h * (2.0 * m.torque - m.D @ w0 - m.K @ th0 - m.K @ (th0 + 0.5 * h * w0))
        rhs[m.gen] += 0.5 * h * (te0 + te1)
        w1 = sl.lu_solve(self.lu, rhs)
        return w1, th0 + 0.5 * h * (w0 + w1)


def dommel_run(
    m: SystemModel,
    x0: np.ndarray,
    h: float,
    t_end: float,
    coupling: str = "simultaneous",
    t0: float = 0.0,
    decimation: int = 1,
    tol: float = 1e-13,
    max_inner: int = 50,
) -> Trajectory:
    """Stationary-frame run; returns states in the same layout as ``sim.integrate``."""
    if coupling not in COUPLINGS:
        raise ValueError(f"coupling must be one of {COUPLINGS}, got {coupling!r}")
    if not t_end > t0:
        raise ValueError("t_end must exceed the start time")
    net = CompanionNetwork.build(m, h)
    x = np.array(x0, dtype=float)
    u, w, psi, th = (x[s].copy() for s in (m.sl_v, m.sl_w, m.sl_p, m.sl_t))
    kc, kr, kl = m.em.KC, m.em.KR, m.em.KL
    has_machine = m.machine is not None
    if has_machine:
        idx = m.machine.index
        gdq = m.machine.gdq
        blk = np.ix_(idx, idx)
        shaft = _Shaft(m, h)

    def machine(theta_g, psi_):
        """Winding currents, companion block and torque at (theta_g, psi_)."""
        g0, g1, _ = gamma_all(theta_g, gdq)
        pm = psi_[idx]
        return g0, -0.5 * pm @ g1 @ pm

    # history: inductor currents and capacitor currents consistent with KCL at t0
    j_l = kl @ psi
    i_m = np.zeros(m.n_e)
    te = 0.0
    if has_machine:
        g0, te = machine(th[m.gen], psi)
        i_m[idx] = g0 @ psi[idx]
    j_c = m.current_injection(t0) - kr @ u - j_l - i_m

    n_steps = int(round((t_end - t0) / h))
    n_keep = n_steps // decimation + 1
    times = np.empty(n_keep)
    states = np.empty((n_keep, m.n))
    times[0], states[0] = t0, x
    kept = 1
    inner_total = 0
    divergent = False
    last_good = 0

    def network(theta_g, t1):
        """Solve G u1 = i for the given machine angle; returns u1, psi1, j_l1, j_c1."""
        hist_l = j_l + 0.5 * h * (kl @ u)
        hist_c = -(2.0 / h) * (kc @ u) - j_c
        rhs = m.current_injection(t1) - hist_l - hist_c
        g = net.G
        if has_machine:
            g0, _, _ = gamma_all(theta_g, gdq)
            g = g.copy()
            g[blk] += 0.5 * h * g0
            rhs[idx] -= g0 @ (psi[idx] + 0.5 * h * u[idx])
        u1 = np.linalg.solve(g, rhs)
        psi1 = psi + 0.5 * h * (u + u1)
        j_l1 = hist_l + 0.5 * h * (kl @ u1)
        j_c1 = (2.0 / h) * (kc @ u1) + hist_c
        return u1, psi1, j_l1, j_c1

    for k in range(1, n_steps + 1):
        t1 = t0 + k * h
        if not has_machine:
            u1, psi1, j_l1, j_c1 = network(None, t1)
            w1, th1 = w, th
        elif coupling == "alternating":
            # shaft sees last step's torque, the machine companion last step's angle
            w1, th1 = shaft.solve(w, th, te, te)
            u1, psi1, j_l1, j_c1 = network(th[m.gen], t1)
            _, te1 = machine(th[m.gen], psi1)
        else:
            th1 = th + h * w
            te1 = te
            for it in range(max_inner):
                u1, psi1, j_l1, j_c1 = network(th1[m.gen], t1)
                _, te1 = machine(th1[m.gen], psi1)
                w1, th_new = shaft.solve(w, th, te, te1)
                change = abs(th_new[m.gen] - th1[m.gen])
                th1 = th_new
                inner_total += 1
                if change <= tol * max(1.0, abs(th1[m.gen])):
                    break
            else:
                raise IntegrationError("inner machine-shaft iteration did not converge", k)
            u1, psi1, j_l1, j_c1 = network(th1[m.gen], t1)
            _, te1 = machine(th1[m.gen], psi1)
        u, psi, j_l, j_c = u1, psi1, j_l1, j_c1
        if has_machine:
            w, th, te = w1, th1, te1
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(psi))):
            divergent = True
            break
        last_good = k
        if k % decimation == 0:
            times[kept] = t1
            row = states[kept]
            row[m.sl_v], row[m.sl_w], row[m.sl_p], row[m.sl_t] = u, w, psi, th
            kept += 1
    traj = Trajectory(times[:kept], states[:kept], "alphabeta", f"dommel-{coupling}", h, divergent, last_good)
    traj.newton_iterations = inner_total
    return traj
