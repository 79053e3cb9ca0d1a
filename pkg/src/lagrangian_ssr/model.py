"""Coupled electro-mechanical ODE in the stationary and synchronous frames.

State layout (first-order form), with n_e flux and n_m shaft coordinates::

    [ flux rates (n_e) | shaft speeds (n_m) | fluxes (n_e) | shaft angles (n_m) ]

In the stationary frame these are (dPsi/dt, dtheta/dt, Psi, theta); in the
synchronous frame (dphi/dt, ddelta/dt, phi, delta) with Psi = R(w t) phi and
theta = delta + w t.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ModelError
from .machine import Machine, MachineParams, gamma, gamma_all
from .network import EnergyMatrices, NetworkSpec, assemble_network, steady_injection
from .shaft import ShaftMatrices, ShaftParams, assemble_shaft
from .transforms import kj_extended, rotate_pairs


@dataclass(frozen=True)
class Energies:
    kinetic: float
    potential: float
    lagrangian: float
    dissipation: float
    injected: float


class SystemModel:
    """Assembled model.  Immutable after construction; RHS calls are read-only."""

    def __init__(
        self,
        spec: NetworkSpec,
        machine: MachineParams | None = None,
        shaft: ShaftParams | None = None,
        torque=None,
    ):
        if machine is not None and shaft is None:
            raise ModelError("a machine needs a shaft (use a single mass for a rigid rotor)")
        self.spec = spec
        self.machine_params = machine
        self.shaft_params = shaft
        self.em: EnergyMatrices = assemble_network(spec, machine)
        self.omega = spec.omega
        self.n_e = self.em.n_e
        self.n_nodes = spec.n_nodes
        self.n_rotor = self.em.n_rotor
        self.machine = Machine(machine, self.em.machine_index, self.n_e) if machine is not None else None
        self.shaft: ShaftMatrices | None = assemble_shaft(shaft) if shaft is not None else None
        self.n_m = self.shaft.n_mass if self.shaft is not None else 0
        self.n = 2 * (self.n_e + self.n_m)

        if self.shaft is not None:
            if np.abs(self.shaft.K @ np.ones(self.n_m)).max() > 1e-9 * max(np.abs(self.shaft.K).max(), 1.0):
                raise ModelError("shaft stiffness must annihilate rigid rotation")
            self.J = self.shaft.J
            self.D = self.shaft.D
            self.K = self.shaft.K
            self.gen = self.shaft.generator
        else:
            self.J = self.D = self.K = np.zeros((0, 0))
            self.gen = None

        t = np.zeros(self.n_m) if torque is None else np.asarray(torque, dtype=float)
        if t.shape != (self.n_m,):
            raise ModelError(f"torque vector must have {self.n_m} entries")
        self.torque = t

        kc = self.em.KC
        self.mass_condition = float(np.linalg.cond(kc))
        try:
            self.KC_inv = np.linalg.inv(kc)
        except np.linalg.LinAlgError as exc:
            raise ModelError("capacitance matrix is singular") from exc
        self.J_inv = 1.0 / np.diag(self.J) if self.n_m else np.zeros(0)

        w = self.omega
        self.Kj = kj_extended(self.n_nodes, self.n_rotor)
        kr, kl = self.em.KR, self.em.KL
        self.C_xy = kr + 2.0 * w * kc @ self.Kj
        self.S_xy = kl + w * kr @ self.Kj + w * w * kc @ self.Kj @ self.Kj
        self.I_ss = steady_injection(spec, self.n_e, machine)
        self.D_offset = self.D @ (w * np.ones(self.n_m)) if self.n_m else np.zeros(0)

        e, m = self.n_e, self.n_m
        self.sl_v = slice(0, e)
        self.sl_w = slice(e, e + m)
        self.sl_p = slice(e + m, 2 * e + m)
        self.sl_t = slice(2 * e + m, 2 * e + 2 * m)

    # -- construction helpers -------------------------------------------------

    def with_torque(self, torque) -> "SystemModel":
        return SystemModel(self.spec, self.machine_params, self.shaft_params, torque)

    def with_spec(self, spec: NetworkSpec) -> "SystemModel":
        return SystemModel(spec, self.machine_params, self.shaft_params, self.torque)

    def with_excitation(self, u_f: float) -> "SystemModel":
        return self.with_spec(replace(self.spec, u_f=u_f))

    def state_labels(self, frame: str = "alphabeta") -> list:
        names = self.em.labels
        if frame == "xy":
            names = [n.replace("a", "x").replace("b", "y") if n[:-1].isdigit() else n for n in names]
            pre_v, pre_p, pre_w, pre_t = "dphi_", "phi_", "ddelta_", "delta_"
        else:
            pre_v, pre_p, pre_w, pre_t = "dpsi_", "psi_", "dtheta_", "theta_"
        masses = [str(k + 1) for k in range(self.n_m)]
        return (
            [pre_v + n for n in names]
            + [pre_w + k for k in masses]
            + [pre_p + n for n in names]
            + [pre_t + k for k in masses]
        )

    def split(self, x: np.ndarray):
        return x[self.sl_v], x[self.sl_w], x[self.sl_p], x[self.sl_t]

    # -- machine coupling -----------------------------------------------------

    def _machine(self, psi: np.ndarray, theta: np.ndarray):
        """Machine current injection (n_e) and electromagnetic torque on the generator."""
        cur = np.zeros(self.n_e)
        if self.machine is None:
            return cur, 0.0
        idx = self.machine.index
        th = theta[self.gen]
        pm = psi[idx]
        g0, g1, _ = gamma_all(th, self.machine.gdq)
        cur[idx] = g0 @ pm
        return cur, -0.5 * pm @ g1 @ pm

    def current_injection(self, t: float) -> np.ndarray:
        return rotate_pairs(self.I_ss, self.omega * t, self.n_nodes)

    # -- right-hand sides -----------------------------------------------------

    def _force(self, v, w, psi, theta, damp, stiff, inj, mech_extra):
        cur, te = self._machine(psi, theta)
        out = np.empty(self.n_e + self.n_m)
        out[: self.n_e] = inj - damp @ v - stiff @ psi - cur
        if self.n_m:
            fm = self.torque - self.D @ w - self.K @ theta - mech_extra
            fm[self.gen] += te
            out[self.n_e :] = fm
        return out

    def force(self, frame: str, t: float, x: np.ndarray) -> np.ndarray:
        """Generalized force: the right side of M q'' = F(t, q', q) with M = blockdiag(K_C, J)."""
        v, w, psi, theta = self.split(x)
        if frame == "xy":
            return self._force(v, w, psi, theta, self.C_xy, self.S_xy, self.I_ss, self.D_offset)
        return self._force(v, w, psi, theta, self.em.KR, self.em.KL, self.current_injection(t), 0.0)

    def accel(self, f: np.ndarray) -> np.ndarray:
        """Apply the inverse mass matrix to a generalized force."""
        out = np.empty_like(f)
        out[: self.n_e] = self.KC_inv @ f[: self.n_e]
        out[self.n_e :] = self.J_inv * f[self.n_e :]
        return out

    def mass_matrix(self) -> np.ndarray:
        q = self.n_e + self.n_m
        mass = np.zeros((q, q))
        mass[: self.n_e, : self.n_e] = self.em.KC
        if self.n_m:
            mass[self.n_e :, self.n_e :] = self.J
        return mass

    def rhs_stationary(self, t: float, x: np.ndarray) -> np.ndarray:
        q = self.n_e + self.n_m
        out = np.empty(self.n)
        out[:q] = self.accel(self.force("alphabeta", t, x))
        out[q:] = x[:q]
        return out

    def rhs_synchronous(self, x: np.ndarray) -> np.ndarray:
        q = self.n_e + self.n_m
        out = np.empty(self.n)
        out[:q] = self.accel(self.force("xy", 0.0, x))
        out[q:] = x[:q]
        return out

    def rhs(self, frame: str, t: float, x: np.ndarray) -> np.ndarray:
        return self.rhs_synchronous(x) if frame == "xy" else self.rhs_stationary(t, x)

    # -- Jacobians ------------------------------------------------------------

    def force_jacobian(self, x: np.ndarray, frame: str) -> tuple[np.ndarray, np.ndarray]:
        """Generalized-force derivatives.

        Returns (Kd, Ks): the damping and stiffness matrices of the linearized
        second-order system M q'' + Kd q' + Ks q = 0 with q = (flux, angles).
        """
        e, m = self.n_e, self.n_m
        damp = self.C_xy if frame == "xy" else self.em.KR
        stiff = self.S_xy if frame == "xy" else self.em.KL
        kd = np.zeros((e + m, e + m))
        ks = np.zeros((e + m, e + m))
        kd[:e, :e] = damp
        ks[:e, :e] = stiff
        if m:
            kd[e:, e:] = self.D
            ks[e:, e:] = self.K
        if self.machine is not None:
            _, _, psi, theta = self.split(x)
            idx = self.machine.index
            th = theta[self.gen]
            pm = psi[idx]
            gdq = self.machine.gdq
            g0, g1, g2 = gamma(th, gdq, 0), gamma(th, gdq, 1), gamma(th, gdq, 2)
            ks[np.ix_(idx, idx)] += g0
            col = g1 @ pm
            ks[idx, e + self.gen] += col
            ks[e + self.gen, idx] += col
            ks[e + self.gen, e + self.gen] += 0.5 * pm @ g2 @ pm
        return kd, ks

    def jacobian(self, x: np.ndarray, frame: str = "xy") -> np.ndarray:
        """Analytic Jacobian of the first-order right-hand side."""
        e, m = self.n_e, self.n_m
        q = e + m
        kd, ks = self.force_jacobian(x, frame)
        minv = np.zeros((q, q))
        minv[:e, :e] = self.KC_inv
        if m:
            minv[e:, e:] = np.diag(self.J_inv)
        a = np.zeros((2 * q, 2 * q))
        a[:q, :q] = -minv @ kd
        a[:q, q:] = -minv @ ks
        a[q:, :q] = np.eye(q)
        return a

    # -- energy bookkeeping (stationary frame) --------------------------------

    def energies(self, t: float, x: np.ndarray) -> Energies:
        v, w, psi, theta = self.split(x)
        kin = 0.5 * v @ self.em.KC @ v + 0.5 * w @ self.J @ w
        pot = 0.5 * psi @ self.em.KL @ psi + 0.5 * theta @ self.K @ theta
        if self.machine is not None:
            pot += self.machine.field_energy(psi, theta[self.gen])
        diss = v @ self.em.KR @ v + w @ self.D @ w
        inj = v @ self.current_injection(t) + w @ self.torque
        return Energies(kin, pot, kin - pot, diss, inj)

    # -- frame maps -----------------------------------------------------------

    def to_stationary(self, t, x_xy: np.ndarray) -> np.ndarray:
        """Map synchronous-frame state(s) to the stationary frame at time(s) t."""
        x = np.asarray(x_xy, dtype=float)
        ang = self.omega * np.asarray(t, dtype=float)
        v = x[..., self.sl_v]
        phi = x[..., self.sl_p]
        out = np.empty_like(x)
        out[..., self.sl_p] = rotate_pairs(phi, ang, self.n_nodes)
        out[..., self.sl_v] = rotate_pairs(v + self.omega * phi @ self.Kj.T, ang, self.n_nodes)
        out[..., self.sl_w] = x[..., self.sl_w] + self.omega
        ang_m = ang[..., None] if np.ndim(ang) else ang
        out[..., self.sl_t] = x[..., self.sl_t] + ang_m
        return out

    def to_synchronous(self, t, x_ab: np.ndarray) -> np.ndarray:
        x = np.asarray(x_ab, dtype=float)
        ang = self.omega * np.asarray(t, dtype=float)
        psi = x[..., self.sl_p]
        phi = rotate_pairs(psi, -ang, self.n_nodes)
        out = np.empty_like(x)
        out[..., self.sl_p] = phi
        out[..., self.sl_v] = rotate_pairs(x[..., self.sl_v], -ang, self.n_nodes) - self.omega * phi @ self.Kj.T
        out[..., self.sl_w] = x[..., self.sl_w] - self.omega
        ang_m = ang[..., None] if np.ndim(ang) else ang
        out[..., self.sl_t] = x[..., self.sl_t] - ang_m
        return out
