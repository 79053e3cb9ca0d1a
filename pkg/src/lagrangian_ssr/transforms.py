"""Coordinate transforms between abc, alpha-beta, dq and the synchronous xy frame.

All transforms are power invariant (sqrt(2/3) Clark scaling) and the zero
sequence is dropped.  The global flux vector is laid out as one (alpha, beta)
pair per three-phase node followed by the rotor winding coordinates; rotor
coordinates are frame independent and are left untouched by every rotation.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

SQRT3 = np.sqrt(3.0)

CLARK = np.sqrt(2.0 / 3.0) * np.array(
    [
        [1.0, -0.5, -0.5],
        [0.0, SQRT3 / 2.0, -SQRT3 / 2.0],
    ]
)

# d/dtheta R(theta) = KJ @ R(theta)
KJ = np.array([[0.0, -1.0], [1.0, 0.0]])


def _finite(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {v!r}")
    return arr


def clark(v_abc) -> np.ndarray:
    """Project a three-phase quantity onto the alpha-beta plane."""
    v = _finite(v_abc, "v_abc")
    if v.shape[0] != 3:
        raise DomainError(f"expected 3 phase values, got shape {v.shape}")
    return CLARK @ v


def inverse_clark(v_ab) -> np.ndarray:
    """Balanced abc quantity whose Clark image is ``v_ab``."""
    v = _finite(v_ab, "v_ab")
    if v.shape[0] != 2:
        raise DomainError(f"expected alpha-beta pair, got shape {v.shape}")
    return CLARK.T @ v


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def park(theta: float) -> np.ndarray:
    """6x6 dq -> alpha-beta map for the machine vector (stator pair + 4 rotor windings)."""
    _finite(theta, "theta")
    p = np.eye(6)
    p[:2, :2] = rotation(theta)
    return p


def extended_rotation(theta: float, n_nodes: int = 3, n_rotor: int = 4) -> np.ndarray:
    """xy -> alpha-beta map for the global flux vector.

    Rotates every AC node pair by ``theta``; identity on the rotor coordinates.
    """
    _finite(theta, "theta")
    n = 2 * n_nodes + n_rotor
    m = np.eye(n)
    r = rotation(theta)
    for k in range(n_nodes):
        m[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = r
    return m


def kj_extended(n_nodes: int = 3, n_rotor: int = 4) -> np.ndarray:
    n = 2 * n_nodes + n_rotor
    m = np.zeros((n, n))
    for k in range(n_nodes):
        m[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = KJ
    return m


def rotate_pairs(v: np.ndarray, theta, n_nodes: int) -> np.ndarray:
    """Apply ``extended_rotation(theta)`` to ``v`` without building the matrix.

    ``v`` may be a single vector (n,) or a stack (k, n) with ``theta`` of shape (k,).
    """
    out = np.array(v, dtype=float, copy=True)
    c = np.cos(theta)
    s = np.sin(theta)
    if out.ndim == 2:
        c = np.asarray(c)[:, None]
        s = np.asarray(s)[:, None]
    a = out[..., 0 : 2 * n_nodes : 2].copy()
    b = out[..., 1 : 2 * n_nodes : 2].copy()
    out[..., 0 : 2 * n_nodes : 2] = c * a - s * b
    out[..., 1 : 2 * n_nodes : 2] = s * a + c * b
    return out
