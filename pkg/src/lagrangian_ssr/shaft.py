"""Multi-mass torsional shaft: inertia, damping and stiffness matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError


@dataclass(frozen=True)
class ShaftParams:
    """Lumped-mass chain in SI units.

    ``inertia`` (kg m^2) has one entry per mass, ``stiffness`` (N m/rad) one per
    coupling between consecutive masses.  ``generator`` is the 0-based index of
    the mass carrying the machine rotor; ``torque_split`` gives the fraction of
    prime-mover torque applied to each mass.
    """

    inertia: tuple
    stiffness: tuple
    self_damping: tuple = ()
    mutual_damping: tuple = ()
    generator: int = 4
    torque_split: tuple = field(default=())

    def __post_init__(self):
        j = np.asarray(self.inertia, dtype=float)
        k = np.asarray(self.stiffness, dtype=float)
        n = j.size
        if n < 1:
            raise ModelError("shaft needs at least one mass")
        if np.any(~np.isfinite(j)) or np.any(j <= 0.0):
            raise ModelError("shaft inertias must be positive")
        if k.size != n - 1:
            raise ModelError(f"shaft with {n} masses needs {n - 1} stiffnesses, got {k.size}")
        if np.any(~np.isfinite(k)) or np.any(k <= 0.0):
            raise ModelError("shaft stiffnesses must be positive")
        d = np.asarray(self.self_damping, dtype=float)
        if d.size not in (0, n) or np.any(d < 0.0):
            raise ModelError("self_damping must be empty or one non-negative value per mass")
        dm = np.asarray(self.mutual_damping, dtype=float)
        if dm.size not in (0, n - 1) or np.any(dm < 0.0):
            raise ModelError("mutual_damping must be empty or one non-negative value per coupling")
        if not 0 <= self.generator < n:
            raise ModelError(f"generator index {self.generator} outside 0..{n - 1}")
        s = np.asarray(self.torque_split, dtype=float)
        if s.size not in (0, n):
            raise ModelError("torque_split must have one entry per mass")

    @property
    def n_mass(self) -> int:
        return len(self.inertia)

    def split(self) -> np.ndarray:
        s = np.asarray(self.torque_split, dtype=float)
        if s.size == 0:
            s = np.zeros(self.n_mass)
            s[self.generator] = 1.0
        return s

    @classmethod
    def from_per_unit(
        cls,
        *,
        h: list,
        k_pu: list,
        s_base: float,
        omega: float,
        damping_ratio: float = 0.0,
        generator: int = 4,
        torque_split=(),
    ) -> "ShaftParams":
        """Inertia constants H (s) and stiffness (pu torque / electrical rad) to SI.

        Angles here are electrical radians, so J = 2 H S / omega^2 and
        k = k_pu S / omega.  ``damping_ratio`` sets mass-proportional self
        damping d_i = c J_i (1/s).
        """
        j = 2.0 * np.asarray(h, dtype=float) * s_base / omega**2
        k = np.asarray(k_pu, dtype=float) * s_base / omega
        return cls(
            inertia=tuple(j),
            stiffness=tuple(k),
            self_damping=tuple(damping_ratio * j),
            generator=generator,
            torque_split=tuple(torque_split),
        )


@dataclass(frozen=True)
class ShaftMatrices:
    J: np.ndarray
    D: np.ndarray
    K: np.ndarray
    generator: int
    split: np.ndarray

    @property
    def n_mass(self) -> int:
        return self.J.shape[0]


def _chain(values: np.ndarray, n: int) -> np.ndarray:
    m = np.zeros((n, n))
    for i, v in enumerate(values):
        m[i, i] += v
        m[i + 1, i + 1] += v
        m[i, i + 1] -= v
        m[i + 1, i] -= v
    return m


def assemble_shaft(p: ShaftParams) -> ShaftMatrices:
    n = p.n_mass
    k = _chain(np.asarray(p.stiffness, dtype=float), n)
    d = np.zeros((n, n))
    if len(p.self_damping):
        d += np.diag(np.asarray(p.self_damping, dtype=float))
    if len(p.mutual_damping):
        d += _chain(np.asarray(p.mutual_damping, dtype=float), n)
    return ShaftMatrices(
        J=np.diag(np.asarray(p.inertia, dtype=float)),
        D=d,
        K=k,
        generator=p.generator,
        split=p.split(),
    )


def torsional_frequencies(m: ShaftMatrices) -> tuple[np.ndarray, float]:
    """Undamped natural frequencies (Hz) of the free chain.

    Returns the sorted non-rigid frequencies and, separately, the rigid-body
    frequency (zero up to rounding).
    """
    jinv_sqrt = 1.0 / np.sqrt(np.diag(m.J))
    sym = jinv_sqrt[:, None] * m.K * jinv_sqrt[None, :]
    lam = np.sort(np.linalg.eigvalsh(sym))
    lam = np.clip(lam, 0.0, None)
    f = np.sqrt(lam) / (2.0 * np.pi)
    return f[1:], float(f[0])
