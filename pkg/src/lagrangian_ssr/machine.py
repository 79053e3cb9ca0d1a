"""Synchronous machine inverse-inductance matrices, currents, torque and field energy.

Machine coordinates are ordered (d, q, f, D, g, Q) in the rotor frame and
(alpha, beta, f, D, g, Q) in the stator frame.  Currents flow *into* the
windings (motor convention), so the stator current drawn from the network
node is ``Gamma(theta) @ psi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from functools import cached_property

import numpy as np

from .errors import ModelError
from .transforms import park

MACHINE_LABELS = ("alpha", "beta", "f", "D", "g", "Q")
ROTOR_LABELS = ("f", "D", "g", "Q")


@dataclass(frozen=True)
class MachineParams:
    """SI winding data, all windings referred to the stator side.

    Inductances in H, resistances in ohm.  ``node`` is the AC node that hosts
    the stator winding.
    """

    ld: float
    lq: float
    lf: float
    lD: float
    lg: float
    lQ: float
    ldf: float
    ldD: float
    lfD: float
    lqg: float
    lqQ: float
    lgQ: float
    rf: float
    rD: float
    rg: float
    rQ: float
    node: int = 3
    ra: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "node":
                continue
            if not np.isfinite(v):
                raise ModelError(f"machine.{f.name} must be finite")
        for name in ("ld", "lq", "lf", "lD", "lg", "lQ", "rf", "rD", "rg", "rQ"):
            if getattr(self, name) <= 0.0:
                raise ModelError(f"machine.{name} must be positive")
        if self.ra != 0.0:
            # a series stator resistance needs an internal node in the node-flux
            # formulation; model it as a separate resistor branch instead
            raise ModelError("machine.ra must be 0: add the stator resistance as a network branch")

    def inductance_dq(self) -> np.ndarray:
        """6x6 inductance matrix (zero axis removed)."""
        return np.array(
            [
                [self.ld, 0.0, self.ldf, self.ldD, 0.0, 0.0],
                [0.0, self.lq, 0.0, 0.0, self.lqg, self.lqQ],
                [self.ldf, 0.0, self.lf, self.lfD, 0.0, 0.0],
                [self.ldD, 0.0, self.lfD, self.lD, 0.0, 0.0],
                [0.0, self.lqg, 0.0, 0.0, self.lg, self.lgQ],
                [0.0, self.lqQ, 0.0, 0.0, self.lgQ, self.lQ],
            ]
        )

    @property
    def rotor_resistances(self) -> np.ndarray:
        return np.array([self.rf, self.rD, self.rg, self.rQ])

    @classmethod
    def from_standard_data(
        cls,
        *,
        s_base: float,
        v_base: float,
        f_base: float,
        xl: float,
        xd: float,
        xd1: float,
        xd2: float,
        xq: float,
        xq1: float,
        xq2: float,
        td01: float,
        td02: float,
        tq01: float,
        tq02: float,
        rotor_ratio: float = 1.0,
        node: int = 3,
    ) -> "MachineParams":
        """Build SI winding data from per-unit reactances and open-circuit time constants.

        Uses the classical (non-exact) equivalent-circuit relations with equal
        stator/rotor mutuals (L_ad / L_aq base).  ``v_base`` is the line-line rms
        voltage, which is also the alpha-beta amplitude base under the power
        invariant Clark transform.  ``rotor_ratio`` rescales the rotor windings
        (flux by k, inductance by k^2) and leaves the stator dynamics unchanged.
        """
        w0 = 2.0 * np.pi * f_base
        xad = xd - xl
        xfd = xad * (xd1 - xl) / (xd - xd1)
        x1d = 1.0 / (1.0 / (xd2 - xl) - 1.0 / xad - 1.0 / xfd)
        rfd = (xad + xfd) / (w0 * td01)
        r1d = (x1d + xad * xfd / (xad + xfd)) / (w0 * td02)

        xaq = xq - xl
        x1q = xaq * (xq1 - xl) / (xq - xq1)
        x2q = 1.0 / (1.0 / (xq2 - xl) - 1.0 / xaq - 1.0 / x1q)
        r1q = (xaq + x1q) / (w0 * tq01)
        r2q = (x2q + xaq * x1q / (xaq + x1q)) / (w0 * tq02)

        zb = v_base**2 / s_base
        lb = zb / w0
        k = rotor_ratio
        return cls(
            ld=xd * lb,
            lq=xq * lb,
            lf=(xad + xfd) * lb * k**2,
            lD=(xad + x1d) * lb * k**2,
            lg=(xaq + x1q) * lb * k**2,
            lQ=(xaq + x2q) * lb * k**2,
            ldf=xad * lb * k,
            ldD=xad * lb * k,
            lfD=xad * lb * k**2,
            lqg=xaq * lb * k,
            lqQ=xaq * lb * k,
            lgQ=xaq * lb * k**2,
            rf=rfd * zb * k**2,
            rD=r1d * zb * k**2,
            rg=r1q * zb * k**2,
            rQ=r2q * zb * k**2,
            node=node,
        )


@dataclass(frozen=True)
class GammaDq:
    """Inverse of the rotor-frame inductance matrix (1/H)."""

    matrix: np.ndarray

    @property
    def gd(self):
        return self.matrix[0, 0]

    @property
    def gq(self):
        return self.matrix[1, 1]

    @property
    def gdf(self):
        return self.matrix[0, 2]

    @property
    def gdD(self):
        return self.matrix[0, 3]

    @property
    def gqg(self):
        return self.matrix[1, 4]

    @property
    def gqQ(self):
        return self.matrix[1, 5]

    @property
    def rotor_block(self) -> np.ndarray:
        return self.matrix[2:, 2:]

    @cached_property
    def stator_entries(self) -> tuple:
        m = self.matrix
        return (float(m[0, 0]), float(m[1, 1]), float(m[0, 2]), float(m[0, 3]), float(m[1, 4]), float(m[1, 5]))

    @cached_property
    def template(self) -> np.ndarray:
        """Order-0 matrix with only the constant rotor block filled in."""
        t = np.zeros((6, 6))
        t[2:, 2:] = self.matrix[2:, 2:]
        return t


def _leading_minor_check(m: np.ndarray) -> None:
    for k in range(1, m.shape[0] + 1):
        if np.linalg.det(m[:k, :k]) <= 0.0:
            raise ModelError(f"inductance matrix is not positive definite: leading minor {k} is non-positive")


def invert_inductance(p: MachineParams) -> GammaDq:
    """Invert the 6x6 dq inductance matrix.

    Decoupled d and q groups are inverted separately so that the cross-axis
    entries are exactly zero.
    """
    l = p.inductance_dq()
    _leading_minor_check(l)
    g = np.zeros((6, 6))
    d_idx = np.array([0, 2, 3])
    q_idx = np.array([1, 4, 5])
    for idx in (d_idx, q_idx):
        sub = np.linalg.inv(l[np.ix_(idx, idx)])
        g[np.ix_(idx, idx)] = 0.5 * (sub + sub.T)
    return GammaDq(g)


def gamma(theta: float, g: GammaDq, order: int = 0) -> np.ndarray:
    """Stator-frame inverse inductance P(theta) Gamma_dq P(theta)^T and its theta-derivatives.

    Closed forms written out entry by entry; ``gamma_similarity`` is the
    independent matrix-product path.
    """
    gm = g.matrix
    dd = gm[0, 0] - gm[1, 1]
    gdf, gdD, gqg, gqQ = gm[0, 2], gm[0, 3], gm[1, 4], gm[1, 5]
    c, s = np.cos(theta), np.sin(theta)
    c2, s2 = np.cos(2.0 * theta), np.sin(2.0 * theta)
    out = np.zeros((6, 6))
    if order == 0:
        out[0, 0] = gm[0, 0] * c * c + gm[1, 1] * s * s
        out[1, 1] = gm[1, 1] * c * c + gm[0, 0] * s * s
        out[0, 1] = dd * s * c
        row_a = (gdf * c, gdD * c, -gqg * s, -gqQ * s)
        row_b = (gdf * s, gdD * s, gqg * c, gqQ * c)
        out[2:, 2:] = gm[2:, 2:]
    elif order == 1:
        out[0, 0] = -dd * s2
        out[1, 1] = dd * s2
        out[0, 1] = dd * c2
        row_a = (-gdf * s, -gdD * s, -gqg * c, -gqQ * c)
        row_b = (gdf * c, gdD * c, -gqg * s, -gqQ * s)
    elif order == 2:
        out[0, 0] = -2.0 * dd * c2
        out[1, 1] = 2.0 * dd * c2
        out[0, 1] = -2.0 * dd * s2
        row_a = (-gdf * c, -gdD * c, gqg * s, gqQ * s)
        row_b = (-gdf * s, -gdD * s, -gqg * c, -gqQ * c)
    else:
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    out[1, 0] = out[0, 1]
    out[0, 2:] = row_a
    out[1, 2:] = row_b
    out[2:, 0] = row_a
    out[2:, 1] = row_b
    return out


def gamma_all(theta: float, g: GammaDq) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orders 0, 1 and 2 together, sharing the trigonometric evaluations."""
    gd, gq, gdf, gdD, gqg, gqQ = g.stator_entries
    dd = gd - gq
    c, s = math.cos(theta), math.sin(theta)
    c2, s2 = c * c - s * s, 2.0 * s * c
    g0 = g.template.copy()
    g0[0, 0] = gd * c * c + gq * s * s
    g0[1, 1] = gq * c * c + gd * s * s
    g0[0, 1] = g0[1, 0] = dd * s * c
    g1 = np.empty((6, 6))
    g1[2:, 2:] = 0.0
    g1[0, 0] = -dd * s2
    g1[1, 1] = dd * s2
    g1[0, 1] = g1[1, 0] = dd * c2
    g2 = np.empty((6, 6))
    g2[2:, 2:] = 0.0
    g2[0, 0] = -2.0 * dd * c2
    g2[1, 1] = 2.0 * dd * c2
    g2[0, 1] = g2[1, 0] = -2.0 * dd * s2
    for out, row_a, row_b in (
        (g0, (gdf * c, gdD * c, -gqg * s, -gqQ * s), (gdf * s, gdD * s, gqg * c, gqQ * c)),
        (g1, (-gdf * s, -gdD * s, -gqg * c, -gqQ * c), (gdf * c, gdD * c, -gqg * s, -gqQ * s)),
        (g2, (-gdf * c, -gdD * c, gqg * s, gqQ * s), (-gdf * s, -gdD * s, -gqg * c, -gqQ * c)),
    ):
        out[0, 2:] = out[2:, 0] = row_a
        out[1, 2:] = out[2:, 1] = row_b
    return g0, g1, g2


def gamma_similarity(theta: float, g: GammaDq) -> np.ndarray:
    p = park(theta)
    return p @ g.matrix @ p.T


def machine_current(psi_m: np.ndarray, theta: float, g: GammaDq) -> np.ndarray:
    """Winding currents (A) from the 6-vector of stator-frame machine fluxes."""
    return gamma(theta, g, 0) @ np.asarray(psi_m, dtype=float)


class Machine:
    """A machine placed in a global flux vector of length ``n_e``.

    ``index`` holds the six global coordinates of (alpha, beta, f, D, g, Q);
    it is the incidence map B written as an index array.
    """

    def __init__(self, params: MachineParams, index, n_e: int):
        self.params = params
        self.gdq = invert_inductance(params)
        self.index = np.asarray(index, dtype=int)
        self.n_e = n_e
        if self.index.shape != (6,):
            raise ModelError("machine incidence must select exactly 6 coordinates")

    def incidence(self) -> np.ndarray:
        b = np.zeros((6, self.n_e))
        b[np.arange(6), self.index] = 1.0
        return b

    def gamma_global(self, theta: float, order: int = 0) -> np.ndarray:
        out = np.zeros((self.n_e, self.n_e))
        out[np.ix_(self.index, self.index)] = gamma(theta, self.gdq, order)
        return out

    def current(self, psi: np.ndarray, theta: float) -> np.ndarray:
        """Machine current injection as a global n_e-vector."""
        out = np.zeros(self.n_e)
        out[self.index] = gamma(theta, self.gdq, 0) @ psi[self.index]
        return out

    def torque(self, psi: np.ndarray, theta: float) -> float:
        """Electromagnetic torque on the generator mass (N m)."""
        pm = psi[self.index]
        return -0.5 * pm @ gamma(theta, self.gdq, 1) @ pm

    def field_energy(self, psi: np.ndarray, theta: float) -> float:
        pm = psi[self.index]
        return 0.5 * pm @ gamma(theta, self.gdq, 0) @ pm
