"""Rotations, gravity alignment, screw decomposition and the hemisphere exponential map.

All rotations are plain 3x3 float64 arrays. Vectors are arrays of shape (3,)
and point sets are arrays of shape (N, 3).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AntipodalInput

E_Z = np.array([0.0, 0.0, 1.0])

# a.b below this counts as antipodal for the minimal geodesic rotation
_ANTIPODAL_TOL = 1e-9


def _skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError(f"cannot normalize vector {v!r}")
    return v / n


def perpendicular_axis(v: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to ``v``.

    Uses the cross product of ``v`` with the basis vector matching the smallest
    absolute component of ``v`` (first one on ties).
    """
    basis = np.zeros(3)
    basis[int(np.argmin(np.abs(v)))] = 1.0
    return normalize(np.cross(v, basis))


def rotation_about_axis(axis, theta: float) -> np.ndarray:
    """Rodrigues rotation by ``theta`` radians about the unit vector ``axis``."""
    axis = np.asarray(axis, dtype=np.float64)
    K = _skew(axis)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def rotation_minimal_geodesic(a, b, allow_antipodal: bool = False) -> np.ndarray:
    """Rotation taking unit vector ``a`` onto ``b`` along the great circle.

    When ``a`` and ``b`` are (numerically) opposite the axis is undefined and
    :class:`AntipodalInput` is raised, unless ``allow_antipodal`` is set, in
    which case a half turn about :func:`perpendicular_axis` of ``b`` is used.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = float(a @ b)
    if c < -1.0 + _ANTIPODAL_TOL:
        if not allow_antipodal:
            raise AntipodalInput(f"vectors {a} and {b} are antipodal")
        return rotation_about_axis(perpendicular_axis(b), np.pi)
    V = _skew(np.cross(a, b))
    return np.eye(3) + V + (V @ V) / (1.0 + c)


def rotation_2d(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotation_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def rotation_angle(R: np.ndarray) -> float:
    """Geodesic angle of ``R`` in radians."""
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T


@dataclass(frozen=True)
class GravityPair:
    """Unit gravity directions of the source (``v_p``) and target (``v_q``) frames."""

    v_p: np.ndarray
    v_q: np.ndarray

    @classmethod
    def from_vectors(cls, v_p, v_q) -> "GravityPair":
        return cls(normalize(v_p), normalize(v_q))

    @classmethod
    def down(cls) -> "GravityPair":
        g = np.array([0.0, 0.0, -1.0])
        return cls(g, g.copy())


@dataclass(frozen=True)
class GravityFrame:
    """Rotations that align the source gravity with the target and the target with e_z."""

    align: np.ndarray  # v_p -> v_q
    to_ez: np.ndarray  # v_q -> e_z
    v_q: np.ndarray

    @classmethod
    def from_gravity(cls, gravity: GravityPair) -> "GravityFrame":
        return cls(
            align=rotation_minimal_geodesic(gravity.v_p, gravity.v_q, allow_antipodal=True),
            to_ez=rotation_minimal_geodesic(gravity.v_q, E_Z, allow_antipodal=True),
            v_q=gravity.v_q,
        )


def screw_decompose(T: RigidTransform, axis, p) -> tuple[np.ndarray, np.ndarray]:
    """Split ``T(p)`` into its screw-rotation image and the translation along ``axis``.

    Returns ``(S, t_parallel)`` with ``S + t_parallel == T.rotation @ p + T.translation``.
    ``p`` may also be an (N, 3) array, in which case ``S`` has the same shape.
    """
    axis = np.asarray(axis, dtype=np.float64)
    t_par = float(axis @ T.translation) * axis
    image = T.apply(p)
    return image - t_par, t_par


def exp_map(phi) -> np.ndarray:
    """Map plane point(s) ``phi`` of shape (2,) or (N, 2) onto the upper hemisphere.

    Points outside the disk of radius pi/2 are clamped onto the equator.
    """
    phi = np.asarray(phi, dtype=np.float64)
    omega = np.linalg.norm(phi, axis=-1)
    clamped = np.minimum(omega, np.pi / 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(omega > 0.0, np.sin(clamped) / np.where(omega > 0.0, omega, 1.0), 0.0)
    xy = phi * scale[..., None]
    z = np.cos(clamped)
    if np.ndim(omega) == 0:
        return np.array([xy[0], xy[1], float(z)])
    return np.column_stack([xy, z])


def log_map(h) -> np.ndarray:
    """Inverse of :func:`exp_map` on the closed upper hemisphere."""
    h = np.asarray(h, dtype=np.float64)
    s = np.linalg.norm(h[..., :2], axis=-1)
    omega = np.arctan2(s, h[..., 2])
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(s > 0.0, omega / np.where(s > 0.0, s, 1.0), 0.0)
    return h[..., :2] * scale[..., None]
