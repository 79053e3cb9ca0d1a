"""Network description and assembly of the node-flux energy matrices.

The global flux vector holds one (alpha, beta) pair per three-phase node,
followed by the machine rotor windings (f, D, g, Q) when a machine is present.
Every branch is a single R, L or C element between two nodes or from a node to
ground; a series R-L line therefore needs an intermediate node.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ModelError
from .machine import MachineParams
from .transforms import rotate_pairs

KINDS = ("R", "L", "C")


@dataclass(frozen=True)
class Branch:
    """One lumped element.  Nodes are 1-based; ``b = 0`` means ground."""

    kind: str
    a: int
    b: int
    value: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown branch kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.value) or self.value <= 0.0:
            raise ModelError(f"{self.kind} branch {self.a}-{self.b} must have a positive value, got {self.value}")
        if self.a < 1 or self.b < 0 or self.a == self.b:
            raise ModelError(f"invalid branch terminals {self.a}-{self.b}")


@dataclass(frozen=True)
class InfiniteBus:
    """Thevenin source u_s (alpha-beta amplitude, V) behind R (ohm) at ``node``."""

    u_s: float
    r: float
    node: int
    omega: float = 2.0 * np.pi * 60.0

    def __post_init__(self):
        if not (np.isfinite(self.u_s) and self.u_s >= 0.0):
            raise ModelError("infinite bus u_s must be finite and non-negative")
        if not (np.isfinite(self.r) and self.r > 0.0):
            raise ModelError("infinite bus resistance must be positive")
        if not (np.isfinite(self.omega) and self.omega > 0.0):
            raise ModelError("infinite bus frequency must be positive")


@dataclass(frozen=True)
class NetworkSpec:
    n_nodes: int
    branches: tuple
    source: InfiniteBus | None = None
    u_f: float = 0.0
    eps_c: float = 1e-9

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ModelError("network needs at least one node")
        if not (np.isfinite(self.eps_c) and self.eps_c > 0.0):
            raise ModelError("eps_c must be positive")
        for br in self.branches:
            if br.a > self.n_nodes or br.b > self.n_nodes:
                raise ModelError(f"branch {br.a}-{br.b} references a node beyond {self.n_nodes}")
        if self.source is not None and not 1 <= self.source.node <= self.n_nodes:
            raise ModelError(f"source node {self.source.node} outside 1..{self.n_nodes}")

    @property
    def omega(self) -> float:
        return self.source.omega if self.source is not None else 2.0 * np.pi * 60.0


@dataclass(frozen=True)
class EnergyMatrices:
    """K_C (F), K_R (S), K_L (1/H) on the global flux vector."""

    KC: np.ndarray
    KR: np.ndarray
    KL: np.ndarray
    labels: tuple
    n_nodes: int
    machine_index: np.ndarray | None
    parasitic: np.ndarray = field(repr=False, default=None)

    @property
    def n_e(self) -> int:
        return self.KC.shape[0]

    @property
    def n_rotor(self) -> int:
        return self.n_e - 2 * self.n_nodes


def coordinate_labels(n_nodes: int, with_machine: bool) -> tuple:
    labels = []
    for k in range(1, n_nodes + 1):
        labels += [f"{k}a", f"{k}b"]
    if with_machine:
        labels += ["f", "D", "g", "Q"]
    return tuple(labels)


def _stamp(m: np.ndarray, a: int, b: int, y: float) -> None:
    """Two-terminal pattern on both alpha and beta coordinates; node 0 is ground."""
    for ph in (0, 1):
        i = 2 * (a - 1) + ph
        m[i, i] += y
        if b > 0:
            j = 2 * (b - 1) + ph
            m[j, j] += y
            m[i, j] -= y
            m[j, i] -= y


def _check_connected(spec: NetworkSpec, machine: MachineParams | None) -> None:
    n = spec.n_nodes
    touched = np.zeros(n + 1, dtype=bool)
    rows, cols = [], []
    for br in spec.branches:
        rows.append(br.a)
        cols.append(br.b)
        touched[br.a] = touched[br.b] = True
    if spec.source is not None:
        rows.append(spec.source.node)
        cols.append(0)
        touched[spec.source.node] = True
    if machine is not None:
        if not 1 <= machine.node <= n:
            raise ModelError(f"machine node {machine.node} outside 1..{n}")
        rows.append(machine.node)
        cols.append(0)
        touched[machine.node] = True
    dangling = [k for k in range(1, n + 1) if not touched[k]]
    if dangling:
        raise ModelError(f"dangling node(s) {dangling}: no element connects to them")
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n + 1, n + 1))
    ncomp, _ = connected_components(g, directed=False)
    if ncomp != 1:
        raise ModelError("network graph is not connected")


def _needs_parasitic(spec: NetworkSpec, n_e: int) -> np.ndarray:
    """Coordinates with no capacitive path to ground.

    A node reached only through series capacitors still leaves K_C singular,
    so every node of a capacitor-connected component without a shunt capacitor
    is regularized, as is every rotor coordinate.
    """
    n = spec.n_nodes
    caps = [br for br in spec.branches if br.kind == "C"]
    rows = [br.a for br in caps]
    cols = [br.b for br in caps]
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n + 1, n + 1))
    _, comp = connected_components(g, directed=False)
    grounded = comp == comp[0]
    mask = np.ones(n_e, dtype=bool)
    for k in range(1, n + 1):
        if grounded[k]:
            mask[2 * (k - 1) : 2 * k] = False
    return mask


def assemble_network(spec: NetworkSpec, machine: MachineParams | None = None) -> EnergyMatrices:
    _check_connected(spec, machine)
    n = spec.n_nodes
    n_e = 2 * n + (4 if machine is not None else 0)
    kc = np.zeros((n_e, n_e))
    kr = np.zeros((n_e, n_e))
    kl = np.zeros((n_e, n_e))
    for br in spec.branches:
        if br.kind == "R":
            _stamp(kr, br.a, br.b, 1.0 / br.value)
        elif br.kind == "L":
            _stamp(kl, br.a, br.b, 1.0 / br.value)
        else:
            _stamp(kc, br.a, br.b, br.value)
    if spec.source is not None:
        _stamp(kr, spec.source.node, 0, 1.0 / spec.source.r)
    index = None
    if machine is not None:
        r0 = 2 * n
        kr[r0:, r0:] += np.diag(1.0 / machine.rotor_resistances)
        s0 = 2 * (machine.node - 1)
        index = np.array([s0, s0 + 1, r0, r0 + 1, r0 + 2, r0 + 3])
    mask = _needs_parasitic(spec, n_e)
    kc[mask, mask] += spec.eps_c
    return EnergyMatrices(
        KC=kc,
        KR=kr,
        KL=kl,
        labels=coordinate_labels(n, machine is not None),
        n_nodes=n,
        machine_index=index,
        parasitic=mask,
    )


def steady_injection(spec: NetworkSpec, n_e: int, machine: MachineParams | None = None) -> np.ndarray:
    """Constant synchronous-frame injection I_ss (A)."""
    out = np.zeros(n_e)
    if spec.source is not None:
        out[2 * (spec.source.node - 1)] = spec.source.u_s / spec.source.r
    if machine is not None and spec.u_f != 0.0:
        out[2 * spec.n_nodes] = spec.u_f / machine.rf
    return out


def source_vectors(spec: NetworkSpec, t: float, n_e: int, machine: MachineParams | None = None):
    """Stationary-frame injection i_s(t) and its synchronous-frame image I_ss."""
    i_ss = steady_injection(spec, n_e, machine)
    i_s = rotate_pairs(i_ss, spec.omega * t, spec.n_nodes)
    return i_s, i_ss


def short_series_capacitors(spec: NetworkSpec, machine: MachineParams | None = None):
    """Remove every node-to-node capacitor by merging its two terminals.

    Returns the reduced spec and the machine record moved to its new node.
    The higher-numbered terminal is folded into the lower one and the
    remaining nodes are renumbered consecutively.
    """
    parent = list(range(spec.n_nodes + 1))

    def find(k):
        while parent[k] != k:
            k = parent[k]
        return k

    for br in spec.branches:
        if br.kind == "C" and br.b > 0:
            a, b = sorted((find(br.a), find(br.b)))
            parent[b] = a
    roots = sorted({find(k) for k in range(1, spec.n_nodes + 1)})
    renum = {r: i + 1 for i, r in enumerate(roots)}
    renum_node = {k: renum[find(k)] for k in range(1, spec.n_nodes + 1)}
    renum_node[0] = 0
    branches = []
    for br in spec.branches:
        if br.kind == "C" and br.b > 0:
            continue
        a, b = renum_node[br.a], renum_node[br.b]
        if a == b:
            continue
        if b != 0 and a > b:
            a, b = b, a
        if a == 0:
            a, b = b, 0
        branches.append(Branch(br.kind, a, b, br.value))
    source = spec.source
    if source is not None:
        source = replace(source, node=renum_node[source.node])
    new_spec = replace(spec, n_nodes=len(roots), branches=tuple(branches), source=source)
    new_machine = replace(machine, node=renum_node[machine.node]) if machine is not None else None
    return new_spec, new_machine
