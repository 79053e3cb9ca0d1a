"""Synchronous-frame equilibrium, torque dispatch and stationary initial states."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .errors import SolverError
from .machine import gamma
from .model import SystemModel
from .transforms import rotate_pairs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Equilibrium:
    phi: np.ndarray
    delta: np.ndarray
    torque: np.ndarray
    residual_norm: float
    iterations: int
    history: list = field(default_factory=list)

    def state(self) -> np.ndarray:
        """Synchronous-frame state vector with zero rates."""
        z = np.zeros(self.phi.size + self.delta.size)
        return np.concatenate([z, self.phi, self.delta])


def _wrap_common(delta: np.ndarray, gen: int | None) -> np.ndarray:
    """Shift all angles by the multiple of 2 pi that brings the generator into (-pi, pi]."""
    if gen is None or delta.size == 0:
        return delta
    g = delta[gen]
    shift = 2.0 * np.pi * np.ceil((g - np.pi) / (2.0 * np.pi))
    return delta - shift


def residual(m: SystemModel, phi: np.ndarray, delta: np.ndarray, torque: np.ndarray) -> np.ndarray:
    """Unscaled equilibrium residual (electrical rows in A, mechanical in N m)."""
    cur = np.zeros(m.n_e)
    mech = np.zeros(m.n_m)
    if m.machine is not None:
        idx = m.machine.index
        th = delta[m.gen]
        pm = phi[idx]
        cur[idx] = gamma(th, m.machine.gdq, 0) @ pm
        mech[m.gen] = 0.5 * pm @ gamma(th, m.machine.gdq, 1) @ pm
    r_e = m.S_xy @ phi + cur - m.I_ss
    r_m = m.K @ delta + mech + m.D_offset - torque if m.n_m else np.zeros(0)
    return np.concatenate([r_e, r_m])


def _scales(m: SystemModel, torque: np.ndarray) -> np.ndarray:
    se = np.abs(m.I_ss).max() if np.any(m.I_ss) else 1.0
    sm = np.abs(torque).max() if np.any(torque) else 1.0
    return np.concatenate([np.full(m.n_e, se), np.full(m.n_m, sm)])


def _jacobian(m: SystemModel, phi: np.ndarray, delta: np.ndarray) -> np.ndarray:
    x = np.concatenate([np.zeros(m.n_e + m.n_m), phi, delta])
    _, ks = m.force_jacobian(x, "xy")
    return ks


def _phi_given_angle(m: SystemModel, th: float) -> np.ndarray:
    a = m.S_xy.copy()
    idx = m.machine.index
    a[np.ix_(idx, idx)] += gamma(th, m.machine.gdq, 0)
    return np.linalg.solve(a, m.I_ss)


def _power_mismatch(m: SystemModel, th: float, torque: np.ndarray) -> float:
    phi = _phi_given_angle(m, th)
    pm = phi[m.machine.index]
    return 0.5 * pm @ gamma(th, m.machine.gdq, 1) @ pm + m.D_offset.sum() - torque.sum()


def _shaft_angles(m: SystemModel, phi: np.ndarray, th: float, torque: np.ndarray) -> np.ndarray:
    """Twist angles that balance the shaft with the generator held at ``th``."""
    rhs = torque - m.D_offset
    pm = phi[m.machine.index]
    rhs[m.gen] -= 0.5 * pm @ gamma(th, m.machine.gdq, 1) @ pm
    keep = np.arange(m.n_m) != m.gen
    delta = np.full(m.n_m, th)
    if keep.any():
        kr = m.K[np.ix_(keep, keep)]
        delta[keep] += np.linalg.solve(kr, rhs[keep])
    return delta


def initial_guess(m: SystemModel, torque: np.ndarray, n_scan: int = 361):
    """Generator angle on the stable branch of the power-angle curve.

    Scans the generator angle, solving the linear electrical block at each
    point, and brackets a root of the power mismatch with positive slope.
    """
    if m.machine is None:
        phi = np.linalg.solve(m.S_xy, m.I_ss)
        return phi, np.zeros(m.n_m)
    grid = np.linspace(-np.pi, np.pi, n_scan)
    f = np.array([_power_mismatch(m, th, torque) for th in grid])
    roots = []
    for k in range(n_scan - 1):
        if f[k] < 0.0 <= f[k + 1]:
            th = brentq(lambda a: _power_mismatch(m, a, torque), grid[k], grid[k + 1], xtol=1e-14)
            roots.append(th)
    if not roots:
        k = int(np.argmin(np.abs(f)))
        raise SolverError(
            "no stable equilibrium: prime-mover torque exceeds the power-angle curve",
            residual=float(np.abs(f[k])),
            iterations=0,
        )
    th = min(roots, key=abs)
    phi = _phi_given_angle(m, th)
    return phi, _shaft_angles(m, phi, th, torque)


def solve_equilibrium(
    m: SystemModel,
    torque=None,
    guess=None,
    tol: float = 1e-8,
    max_iter: int = 50,
) -> Equilibrium:
    """Damped Newton on the synchronous-frame equilibrium equations."""
    torque = m.torque if torque is None else np.asarray(torque, dtype=float)
    if guess is None:
        phi, delta = initial_guess(m, torque)
    else:
        phi, delta = (np.array(g, dtype=float) for g in guess)
    scale = _scales(m, torque)
    x = np.concatenate([phi, delta])
    ne = m.n_e

    def res(z):
        return residual(m, z[:ne], z[ne:], torque) / scale

    r = res(x)
    norm = np.abs(r).max()
    history = [norm]
    it = 0
    while it < max_iter:
        it += 1
        jac = _jacobian(m, x[:ne], x[ne:]) / scale[:, None]
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular equilibrium Jacobian", residual=norm, iterations=it) from exc
        lam = 1.0
        while True:
            trial = x + lam * step
            trial[ne:] = _wrap_common(trial[ne:], m.gen)
            r_t = res(trial)
            n_t = np.abs(r_t).max()
            if n_t < norm or lam < 1e-6:
                break
            lam *= 0.5
        x, r, norm = trial, r_t, n_t
        history.append(norm)
        log.debug("equilibrium iteration %d residual %.3e", it, norm)
        if norm < tol:
            break
    if not norm < tol:
        raise SolverError(f"equilibrium did not converge (residual {norm:.3e})", residual=norm, iterations=it)
    return Equilibrium(x[:ne], x[ne:], torque.copy(), float(norm), it, history)


@dataclass(frozen=True)
class TerminalQuantities:
    """Machine terminal quantities in alpha-beta magnitudes (line rms equivalents)."""

    voltage: float
    current: float
    p: float
    q: float

    @property
    def pf(self) -> float:
        s = np.hypot(self.p, self.q)
        return self.p / s if s > 0 else 1.0


def terminal_quantities(m: SystemModel, eq: Equilibrium) -> TerminalQuantities:
    idx = m.machine.index
    node = idx[:2]
    u = m.omega * (m.Kj @ eq.phi)[node]
    i_in = gamma(eq.delta[m.gen], m.machine.gdq, 0)[:2] @ eq.phi[idx]
    v = complex(u[0], u[1])
    i_out = -complex(i_in[0], i_in[1])
    s = v * np.conj(i_out)
    return TerminalQuantities(abs(v), abs(i_out), s.real, s.imag)


@dataclass(frozen=True)
class Dispatch:
    model: SystemModel
    equilibrium: Equilibrium
    torque: np.ndarray
    u_s: float
    u_f: float


def _complex_network(m: SystemModel):
    """Node-level complex stiffness of the synchronous-frame network (no machine)."""
    n = m.n_nodes
    s = m.S_xy[: 2 * n, : 2 * n]
    return s[0::2, 0::2] + 1j * s[1::2, 0::2]


def dispatch_torques(
    m: SystemModel,
    v_target: float,
    i_target: float,
    pf: float,
    split=None,
) -> Dispatch:
    """Operating point from terminal targets.

    ``v_target`` and ``i_target`` are alpha-beta magnitudes (equal to line rms
    values under the power invariant transform); ``pf`` is lagging.  Solves for
    the prime-mover torque, the field voltage and the infinite-bus voltage that
    reproduce the targets, then polishes with the full equilibrium Newton.
    """
    if not 0.0 < pf <= 1.0:
        raise ValueError(f"pf must lie in (0, 1], got {pf}")
    split = m.shaft.split if split is None else np.asarray(split, dtype=float)
    if abs(split.sum() - 1.0) > 1e-12:
        raise ValueError("torque split must sum to 1")
    mp = m.machine_params
    w = m.omega
    n = m.n_nodes
    src = m.spec.source
    k_node = mp.node - 1

    sc = _complex_network(m)
    v3 = complex(v_target, 0.0)
    i_out = i_target * np.exp(-1j * np.arccos(pf))
    phi3 = v3 / (1j * w)
    # unknowns: phi at the other nodes and the complex source current
    others = [k for k in range(n) if k != k_node]
    a = np.zeros((n, n), dtype=complex)
    a[:, : n - 1] = sc[:, others]
    a[src.node - 1, n - 1] = -1.0
    b = -sc[:, k_node] * phi3
    b[k_node] += i_out
    sol = np.linalg.solve(a, b)
    phi_c = np.zeros(n, dtype=complex)
    phi_c[others] = sol[: n - 1]
    phi_c[k_node] = phi3
    j_src = sol[n - 1]
    rot = np.exp(-1j * np.angle(j_src))
    phi_c *= rot
    i_mach = -i_out * rot
    u_s = abs(j_src) * src.r

    # machine internal angle from the q-axis flux behind L_q
    e = phi_c[k_node] - mp.lq * i_mach
    th = np.angle(e)
    dax = np.exp(1j * th)
    i_d = (i_mach * np.conj(dax)).real
    i_q = (i_mach * np.conj(dax)).imag
    i_f = (abs(e) - (mp.ld - mp.lq) * i_d) / mp.ldf
    if i_f < 0.0:
        th += np.pi
        i_d, i_q = -i_d, -i_q
        i_f = (-abs(e) - (mp.ld - mp.lq) * i_d) / mp.ldf
    u_f = mp.rf * i_f

    phi = np.zeros(m.n_e)
    phi[0 : 2 * n : 2] = phi_c.real
    phi[1 : 2 * n : 2] = phi_c.imag
    r0 = 2 * n
    phi[r0:] = [
        mp.ldf * i_d + mp.lf * i_f,
        mp.ldD * i_d + mp.lfD * i_f,
        mp.lqg * i_q,
        mp.lqQ * i_q,
    ]
    m2 = m.with_spec(replace(m.spec, u_f=u_f, source=replace(src, u_s=u_s)))
    pm = phi[m2.machine.index]
    t_e = -0.5 * pm @ gamma(th, m2.machine.gdq, 1) @ pm
    total = m2.D_offset.sum() - t_e
    torque = total * split
    m2 = m2.with_torque(torque)
    delta = _shaft_angles(m2, phi, th, torque)
    eq = solve_equilibrium(m2, torque, guess=(phi, _wrap_common(delta, m2.gen)))
    return Dispatch(m2, eq, torque, u_s, u_f)


def initial_state_stationary(m: SystemModel, eq: Equilibrium, t0: float = 0.0) -> np.ndarray:
    """Stationary-frame state on the synchronous trajectory through ``eq`` at time t0."""
    ang = m.omega * t0
    psi = rotate_pairs(eq.phi, ang, m.n_nodes)
    dpsi = m.omega * (m.Kj @ psi)
    return np.concatenate([dpsi, np.full(m.n_m, m.omega), psi, eq.delta + ang])
