"""Fixed-step time integration, derived channels and envelope estimation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sl

from .errors import EstimationError, IntegrationError
from .machine import gamma_all
from .model import SystemModel

FRAMES = ("alphabeta", "xy")
METHODS = ("trap", "rk4")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    frame: str
    method: str
    h: float
    divergent: bool = False
    last_good: int = -1
    newton_iterations: int = 0

    def __len__(self) -> int:
        return self.times.size


def _check(frame: str, method: str, h: float, t_end: float, t0: float) -> None:
    if frame not in FRAMES:
        raise ValueError(f"frame must be one of {FRAMES}, got {frame!r}")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if not (np.isfinite(h) and h > 0.0):
        raise ValueError(f"step must be positive, got {h}")
    if not t_end > t0:
        raise ValueError("t_end must exceed the start time")


class _TrapStepper:
    """Trapezoidal rule written on the second-order system M q'' = F(t, q', q).

    The unknown per step is the new rate vector v1, with q1 = q0 + h/2 (v0 + v1).
    Newton iterates on M (v1 - v0) - h/2 (F1 + F0) = 0 with the iteration
    matrix M + h/2 Kd + h^2/4 Ks, which never forms the inverse mass matrix.
    Only the machine block of Ks depends on the state; the rest is assembled
    once.
    """

    def __init__(self, m: SystemModel, frame: str, h: float, tol: float, max_iter: int):
        self.m, self.frame, self.h = m, frame, h
        self.tol, self.max_iter = tol, max_iter
        self.q = q = m.n_e + m.n_m
        self.mass = m.mass_matrix()
        kd = np.zeros((q, q))
        ks = np.zeros((q, q))
        kd[: m.n_e, : m.n_e] = m.C_xy if frame == "xy" else m.em.KR
        ks[: m.n_e, : m.n_e] = m.S_xy if frame == "xy" else m.em.KL
        if m.n_m:
            kd[m.n_e :, m.n_e :] = m.D
            ks[m.n_e :, m.n_e :] = m.K
        self.base = self.mass + 0.5 * h * kd + 0.25 * h * h * ks
        self.linear = m.machine is None
        self.lu = sl.lu_factor(self.base) if self.linear else None
        if not self.linear:
            idx = m.machine.index
            self.idx = idx
            self.block = np.ix_(idx, idx)
            self.gcol = m.n_e + m.gen
        self.iterations = 0
        self.scale = np.ones(2)

    def set_scale(self, x0: np.ndarray) -> None:
        """Rate scales per block: the larger of |rate| and omega * |coordinate| at the start."""
        m, q = self.m, self.q
        v0, c0 = x0[:q], x0[q:]
        for b, sl_ in enumerate((slice(0, m.n_e), slice(m.n_e, q))):
            s = max(np.abs(v0[sl_]).max(initial=0.0), m.omega * np.abs(c0[sl_]).max(initial=0.0))
            self.scale[b] = s if s > 0.0 else 1.0

    def _iteration_matrix(self, x: np.ndarray) -> np.ndarray:
        m = self.m
        psi = x[m.sl_p]
        th = x[m.sl_t][m.gen]
        g0, g1, g2 = gamma_all(th, m.machine.gdq)
        pm = psi[self.idx]
        c = 0.25 * self.h * self.h
        a = self.base.copy()
        a[self.block] += c * g0
        col = c * (g1 @ pm)
        a[self.idx, self.gcol] += col
        a[self.gcol, self.idx] += col
        a[self.gcol, self.gcol] += c * 0.5 * (pm @ g2 @ pm)
        return a

    def _solve(self, x: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        if self.lu is not None:
            return sl.lu_solve(self.lu, rhs)
        return np.linalg.solve(self._iteration_matrix(x), rhs)

    def step(self, t0: float, x0: np.ndarray, f0: np.ndarray, k: int):
        m, h, q = self.m, self.h, self.q
        t1 = t0 + h
        v0 = x0[:q]
        c0 = x0[q:]
        v1 = v0.copy()
        x1 = np.empty_like(x0)
        prev = np.inf
        err = np.inf
        for it in range(1, self.max_iter + 1):
            x1[:q] = v1
            x1[q:] = c0 + 0.5 * h * (v0 + v1)
            f1 = m.force(self.frame, t1, x1)
            g = self.mass @ (v1 - v0) - 0.5 * h * (f1 + f0)
            dv = self._solve(x1, -g)
            v1 = v1 + dv
            self.iterations += 1
            if not np.all(np.isfinite(v1)):
                raise IntegrationError("Newton iteration produced non-finite values", k)
            err_e = np.abs(dv[: m.n_e]).max(initial=0.0) / max(self.scale[0], np.abs(v1[: m.n_e]).max(initial=0.0))
            err_m = np.abs(dv[m.n_e :]).max(initial=0.0) / max(self.scale[1], np.abs(v1[m.n_e :]).max(initial=0.0))
            err = max(err_e, err_m)
            if self.linear or err <= self.tol:
                break
            # stagnation at rounding level counts as converged
            if it >= 3 and err >= prev and err < 1e-8:
                break
            prev = err
        else:
            if err > 1e-8:
                raise IntegrationError(f"Newton did not converge (update {err:.2e})", k)
        x1[:q] = v1
        x1[q:] = c0 + 0.5 * h * (v0 + v1)
        f1 = m.force(self.frame, t1, x1)
        return x1, f1


def integrate(
    m: SystemModel,
    x0: np.ndarray,
    frame: str = "alphabeta",
    method: str = "trap",
    h: float = 1e-5,
    t_end: float = 0.1,
    t0: float = 0.0,
    decimation: int = 1,
    tol: float = 1e-10,
    max_iter: int = 10,
) -> Trajectory:
    """Integrate from x0 at t0 to t_end with a fixed step.

    ``trap`` is the implicit trapezoidal rule with a per-step Newton solve;
    ``rk4`` is the classical explicit scheme, usable only when every
    eigenvalue times h lies in its stability region (no parasitic modes).
    """
    _check(frame, method, h, t_end, t0)
    if decimation < 1:
        raise ValueError("decimation must be >= 1")
    n_steps = int(round((t_end - t0) / h))
    x = np.array(x0, dtype=float)
    if x.shape != (m.n,):
        raise ValueError(f"initial state must have {m.n} entries")
    n_keep = n_steps // decimation + 1
    times = np.empty(n_keep)
    states = np.empty((n_keep, m.n))
    times[0] = t0
    states[0] = x
    kept = 1
    divergent = False
    last_good = 0
    stepper = None
    if method == "trap":
        stepper = _TrapStepper(m, frame, h, tol, max_iter)
        stepper.set_scale(x)
        f = m.force(frame, t0, x)
    t = t0
    for k in range(1, n_steps + 1):
        if method == "trap":
            x, f = stepper.step(t, x, f, k)
        else:
            x = _rk4_step(m, frame, t, x, h)
        t = t0 + k * h
        if not np.all(np.isfinite(x)) or np.abs(x).max() > 1e250:
            divergent = True
            break
        last_good = k
        if k % decimation == 0:
            times[kept] = t
            states[kept] = x
            kept += 1
    return Trajectory(
        times[:kept],
        states[:kept],
        frame,
        method,
        h,
        divergent,
        last_good,
        stepper.iterations if stepper is not None else 0,
    )


def _rk4_step(m: SystemModel, frame: str, t: float, x: np.ndarray, h: float) -> np.ndarray:
    k1 = m.rhs(frame, t, x)
    k2 = m.rhs(frame, t + 0.5 * h, x + 0.5 * h * k1)
    k3 = m.rhs(frame, t + 0.5 * h, x + 0.5 * h * k2)
    k4 = m.rhs(frame, t + h, x + h * k3)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def to_stationary(m: SystemModel, traj: Trajectory) -> Trajectory:
    if traj.frame == "alphabeta":
        return traj
    states = m.to_stationary(traj.times, traj.states)
    return Trajectory(traj.times, states, "alphabeta", traj.method, traj.h, traj.divergent, traj.last_good)


def to_synchronous(m: SystemModel, traj: Trajectory) -> Trajectory:
    if traj.frame == "xy":
        return traj
    states = m.to_synchronous(traj.times, traj.states)
    return Trajectory(traj.times, states, "xy", traj.method, traj.h, traj.divergent, traj.last_good)


@dataclass
class DerivedChannels:
    """Stationary-frame node voltages (V), amplitudes (V), voltage-vector
    angular velocities (rad/s, NaN where the amplitude vanishes), mass speeds
    (rad/s) and mechanical powers (W)."""

    voltages: np.ndarray
    amplitudes: np.ndarray
    omega_u: np.ndarray
    speeds: np.ndarray
    powers: np.ndarray

    def columns(self) -> dict:
        cols = {}
        for k in range(self.amplitudes.shape[1]):
            cols[f"u{k + 1}_alpha"] = self.voltages[:, k, 0]
            cols[f"u{k + 1}_beta"] = self.voltages[:, k, 1]
            cols[f"u{k + 1}_amp"] = self.amplitudes[:, k]
            cols[f"u{k + 1}_omega"] = self.omega_u[:, k]
        for k in range(self.speeds.shape[1]):
            cols[f"speed{k + 1}"] = self.speeds[:, k]
            cols[f"power{k + 1}"] = self.powers[:, k]
        return cols


def vector_angular_velocity(u: np.ndarray, du: np.ndarray, floor: float) -> np.ndarray:
    """(u_a du_b - u_b du_a) / |u|^2, NaN where |u| < floor."""
    mag2 = u[..., 0] ** 2 + u[..., 1] ** 2
    out = np.full(mag2.shape, np.nan)
    ok = mag2 >= floor * floor
    out[ok] = (u[..., 0] * du[..., 1] - u[..., 1] * du[..., 0])[ok] / mag2[ok]
    return out


def derive(traj: Trajectory, m: SystemModel) -> DerivedChannels:
    st = to_stationary(m, traj)
    n = m.n_nodes
    xs = st.states
    u = xs[:, : 2 * n].reshape(-1, n, 2)
    du = np.empty_like(u)
    for i, (t, x) in enumerate(zip(st.times, xs)):
        du[i] = m.rhs_stationary(t, x)[: 2 * n].reshape(n, 2)
    amp = np.hypot(u[..., 0], u[..., 1])
    rated = amp.max() if amp.size else 0.0
    omega_u = vector_angular_velocity(u, du, max(1e-9 * rated, 1e-300))
    speeds = xs[:, m.sl_w]
    powers = speeds * m.torque[None, :]
    return DerivedChannels(u, amp, omega_u, speeds, powers)


def _per_cycle_rms(signal: np.ndarray, dt: float, f_hint: float):
    period = 1.0 / f_hint
    n_cycles = int(np.floor(signal.size * dt / period))
    if n_cycles < 3:
        raise EstimationError(f"need at least 3 cycles of {f_hint} Hz, got {signal.size * dt / period:.2f}")
    t = np.arange(signal.size) * dt
    centres, rms = [], []
    for c in range(n_cycles):
        a, b = c * period, (c + 1) * period
        sel = (t >= a) & (t < b)
        rms.append(np.sqrt(np.mean(signal[sel] ** 2)))
        centres.append(0.5 * (a + b))
    return np.array(centres), np.array(rms)


def envelope_growth(signal, dt: float, f_hint: float) -> float:
    """Exponential growth rate (1/s) from the log of per-cycle RMS amplitudes."""
    sig = np.asarray(signal, dtype=float)
    centres, rms = _per_cycle_rms(sig, dt, f_hint)
    if np.any(rms <= 0.0):
        raise EstimationError("signal vanishes over a full cycle")
    slope, _ = np.polyfit(centres, np.log(rms), 1)
    return float(slope)


def zero_crossing_frequency(signal, dt: float) -> float:
    """Mean frequency from linearly interpolated zero crossings."""
    s = np.asarray(signal, dtype=float)
    idx = np.flatnonzero(np.signbit(s[:-1]) != np.signbit(s[1:]))
    if idx.size < 3:
        raise EstimationError("fewer than three zero crossings")
    tc = (idx + s[idx] / (s[idx] - s[idx + 1])) * dt
    return float((tc.size - 1) / (2.0 * (tc[-1] - tc[0])))


@dataclass
class EnergyAudit:
    residual: np.ndarray
    peak_power: float

    @property
    def relative(self) -> float:
        return float(np.abs(self.residual).max() / self.peak_power) if self.peak_power > 0 else 0.0


def energy_audit(m: SystemModel, traj: Trajectory) -> EnergyAudit:
    """Per-step power balance dH/dt + dissipation - injected, in W.

    Uses consecutive stored samples; dissipation and injected power are
    evaluated at the step midpoint (mean of endpoint rates and sources),
    which is the balance the trapezoidal rule satisfies exactly for linear
    systems.
    """
    st = to_stationary(m, traj)
    t = st.times
    xs = st.states
    e = [m.energies(ti, xi) for ti, xi in zip(t, xs)]
    h_tot = np.array([en.kinetic + en.potential for en in e])
    v = xs[:, m.sl_v]
    w = xs[:, m.sl_w]
    inj = np.array([m.current_injection(ti) for ti in t])
    vm = 0.5 * (v[1:] + v[:-1])
    wm = 0.5 * (w[1:] + w[:-1])
    im = 0.5 * (inj[1:] + inj[:-1])
    diss = np.einsum("ki,ij,kj->k", vm, m.em.KR, vm) + np.einsum("ki,ij,kj->k", wm, m.D, wm)
    p_in = np.einsum("ki,ki->k", vm, im) + wm @ m.torque
    dt = np.diff(t)
    res = np.diff(h_tot) / dt + diss - p_in
    return EnergyAudit(res, float(np.abs(p_in).max()))


def write_trajectory_csv(traj: Trajectory, m: SystemModel, path, with_derived: bool = True) -> None:
    labels = m.state_labels(traj.frame)
    cols = derive(traj, m).columns() if with_derived else {}
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + labels + list(cols))
        extra = np.column_stack(list(cols.values())) if cols else np.zeros((len(traj), 0))
        for i in range(len(traj)):
            row = ["%.9g" % traj.times[i]]
            row += ["%.12g" % v for v in traj.states[i]]
            row += ["%.12g" % v for v in extra[i]]
            w.writerow(row)
