"""Linearization at an equilibrium, eigenanalysis and the stability verdict."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sl

from .model import SystemModel
from .steady import Equilibrium

PARASITIC_RE = 1e6
PARASITIC_IM = 1e5


@dataclass(frozen=True)
class LinearModel:
    """State matrix A and the equivalent pencil (A_s, E) with A = E^-1 A_s.

    A follows the block layout [d(rates); d(coords)] of the state vector.  The
    pencil keeps the mass matrix un-inverted, which is what the eigensolver
    uses: the parasitic capacitances put entries near 1e12 into A and an
    explicit-A eigensolve then loses several digits on the slow modes.
    """

    A: np.ndarray
    A_s: np.ndarray
    E: np.ndarray
    labels: list
    equilibrium: Equilibrium


@dataclass(frozen=True)
class ModalResult:
    eigenvalues: np.ndarray
    vectors: np.ndarray
    frequencies: np.ndarray
    parasitic: np.ndarray
    labels: list = field(default_factory=list)

    def physical(self) -> np.ndarray:
        return np.flatnonzero(~self.parasitic)

    def find(self, freq_hz: float, upper: bool = True) -> int:
        """Index of the physical mode closest to ``freq_hz`` (Im >= 0 branch by default)."""
        cand = [k for k in self.physical() if (self.eigenvalues[k].imag >= 0) == upper]
        return min(cand, key=lambda k: abs(self.frequencies[k] - freq_hz))


@dataclass(frozen=True)
class Verdict:
    kind: str
    modes: list

    def __str__(self) -> str:
        return self.kind

    def describe(self, mr: ModalResult) -> str:
        if self.kind == "AsymptoticallyStable":
            return "STABLE"
        freqs = sorted({round(float(mr.frequencies[k]), 2) for k in self.modes})
        tag = "UNSTABLE" if self.kind == "Unstable" else "MARGINAL"
        return f"{tag}: " + ", ".join(f"{f:.2f} Hz mode" for f in freqs)


def linearize(m: SystemModel, eq: Equilibrium) -> LinearModel:
    x = eq.state()
    q = m.n_e + m.n_m
    mass = m.mass_matrix()
    kd, ks = m.force_jacobian(x, "xy")
    a_s = np.zeros((2 * q, 2 * q))
    a_s[:q, :q] = -kd
    a_s[:q, q:] = -ks
    a_s[q:, :q] = np.eye(q)
    e = np.eye(2 * q)
    e[:q, :q] = mass
    minv = np.zeros((q, q))
    minv[: m.n_e, : m.n_e] = m.KC_inv
    if m.n_m:
        minv[m.n_e :, m.n_e :] = np.diag(m.J_inv)
    a = a_s.copy()
    a[:q] = minv @ a_s[:q]
    return LinearModel(a, a_s, e, m.state_labels("xy"), eq)


def is_parasitic(lam: np.ndarray, re_lim: float = PARASITIC_RE, im_lim: float = PARASITIC_IM) -> np.ndarray:
    return (np.abs(lam.real) > re_lim) | (np.abs(lam.imag) > im_lim)


def normalize_vector(v: np.ndarray) -> np.ndarray:
    """Unit 2-norm with the largest-magnitude component real and positive."""
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def modal(lm: LinearModel, re_lim: float = PARASITIC_RE, im_lim: float = PARASITIC_IM) -> ModalResult:
    lam, vec = sl.eig(lm.A_s, lm.E)
    if not np.all(np.isfinite(lam)):
        raise np.linalg.LinAlgError(f"eigensolver returned non-finite eigenvalues (cond(E) = {np.linalg.cond(lm.E):.3e})")
    # exact conjugate pairing for real input
    for k in range(lam.size):
        if abs(lam[k].imag) < 1e-12 * max(abs(lam[k]), 1.0):
            lam[k] = lam[k].real
            vec[:, k] = vec[:, k].real
    order = np.lexsort((-lam.imag, -np.abs(lam.imag)))
    lam = lam[order]
    vec = vec[:, order]
    vec = np.column_stack([normalize_vector(vec[:, k]) for k in range(lam.size)])
    return ModalResult(
        eigenvalues=lam,
        vectors=vec,
        frequencies=np.abs(lam.imag) / (2.0 * np.pi),
        parasitic=is_parasitic(lam, re_lim, im_lim),
        labels=list(lm.labels),
    )


def project_physical(mr: ModalResult, dx: np.ndarray) -> np.ndarray:
    """Drop the parasitic-mode content of a synchronous-frame perturbation.

    A perturbation with parasitic content starts stiff oscillations that the
    trapezoidal rule does not damp (its amplification tends to -1), so
    perturbed runs are seeded on the physical modal subspace.
    """
    coef = np.linalg.solve(mr.vectors, np.asarray(dx, dtype=complex))
    coef[mr.parasitic] = 0.0
    return (mr.vectors @ coef).real


def verdict(mr: ModalResult, tol_pos: float = 1e-6) -> Verdict:
    phys = mr.physical()
    re = mr.eigenvalues.real
    unstable = [int(k) for k in phys if re[k] > tol_pos]
    if unstable:
        return Verdict("Unstable", unstable)
    marginal = [int(k) for k in phys if abs(re[k]) <= tol_pos]
    if marginal:
        return Verdict("Marginal", marginal)
    return Verdict("AsymptoticallyStable", [])


def write_eigen_csv(mr: ModalResult, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "re", "im", "freq_hz", "parasitic"])
        for k, lam in enumerate(mr.eigenvalues):
            w.writerow([k + 1, f"{lam.real:.10g}", f"{lam.imag:.10g}", f"{mr.frequencies[k]:.10g}", int(mr.parasitic[k])])


def write_modal_vectors_csv(mr: ModalResult, path, modes=None) -> None:
    """One row per state label; a (re, im) column pair per selected mode."""
    if modes is None:
        modes = [k for k in mr.physical() if mr.eigenvalues[k].imag > 0]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["state"]
        for k in modes:
            header += [f"mode{k + 1}_re", f"mode{k + 1}_im"]
        w.writerow(header)
        for i, name in enumerate(mr.labels):
            row = [name]
            for k in modes:
                row += [f"{mr.vectors[i, k].real:.6g}", f"{mr.vectors[i, k].imag:.6g}"]
            w.writerow(row)
