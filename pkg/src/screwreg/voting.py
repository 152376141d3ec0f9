"""Stage III: rotation-angle voting about the pole and final transform assembly."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePoint, EmptyInput
from .geometry import GravityFrame, orthonormalize, rotation_2d, rotation_z

TWO_PI = 2.0 * np.pi
_DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class AngleVoteConfig:
    s: int = 360

    def __post_init__(self):
        if self.s < 4:
            raise ValueError("need at least 4 angle bins")

    @property
    def zeta(self) -> float:
        return np.pi / self.s

    def centers(self) -> np.ndarray:
        k = np.arange(1, self.s + 1)
        return (2 * k - 1) * np.pi / self.s


def _signed_angles(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    dot = u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1]
    return np.mod(np.arctan2(cross, dot), TWO_PI)


def per_pair_angles(p_hat, q_hat, C0) -> tuple[np.ndarray, np.ndarray]:
    """Counter-clockwise angles from ``p_hat - C0`` to ``q_hat - C0`` in ``[0, 2pi)``.

    Returns ``(angles, valid)``; pairs with an endpoint on the pole are marked
    invalid and their angle is set to 0.
    """
    u = np.asarray(p_hat, dtype=np.float64) - C0
    v = np.asarray(q_hat, dtype=np.float64) - C0
    valid = (np.hypot(u[:, 0], u[:, 1]) >= _DEGENERATE_NORM) & (np.hypot(v[:, 0], v[:, 1]) >= _DEGENERATE_NORM)
    ang = np.where(valid, _signed_angles(u, v), 0.0)
    ang[ang >= TWO_PI] = 0.0
    return ang, valid


def per_pair_angle(p_hat, q_hat, C0) -> float:
    ang, valid = per_pair_angles(np.reshape(p_hat, (1, 2)), np.reshape(q_hat, (1, 2)), np.asarray(C0, dtype=np.float64))
    if not valid[0]:
        raise DegeneratePoint("point coincides with the pole")
    return float(ang[0])


def circular_distance(a, b) -> np.ndarray:
    d = np.mod(np.abs(np.asarray(a) - np.asarray(b)), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def vote_angle(angles, cfg: AngleVoteConfig | None = None) -> tuple[float, np.ndarray]:
    """Grid centre collecting the most angles within ``zeta``.

    Returns ``(theta_star, inliers)`` where ``inliers`` are positions in ``angles``.
    Ties go to the smallest bin index.
    """
    cfg = cfg or AngleVoteConfig()
    angles = np.asarray(angles, dtype=np.float64)
    if angles.size == 0:
        raise EmptyInput("vote_angle needs at least one angle")
    s, zeta = cfg.s, cfg.zeta
    centers = cfg.centers()
    home = np.floor(np.mod(angles, TWO_PI) * (s / TWO_PI)).astype(np.int64) % s
    counts = np.zeros(s, dtype=np.int64)
    # an angle can only fall within zeta of its own bin or the two neighbours
    for shift in (-1, 0, 1):
        k = (home + shift) % s
        hit = circular_distance(angles, centers[k]) <= zeta
        np.add.at(counts, k[hit], 1)
    best = int(np.argmax(counts))
    theta = float(centers[best])
    inliers = np.flatnonzero(circular_distance(angles, theta) <= zeta)
    return theta, inliers


def refine_theta(angles, grid_theta: float, weights=None) -> float:
    """Circular mean of ``angles``, expressed next to ``grid_theta``.

    With ``weights`` set to ``|p_hat - C0| * |q_hat - C0|`` this is the
    least-squares planar rotation about the pole.
    """
    angles = np.asarray(angles, dtype=np.float64)
    if angles.size == 0:
        raise EmptyInput("refine_theta needs at least one angle")
    w = np.ones_like(angles) if weights is None else np.asarray(weights, dtype=np.float64)
    d = angles - grid_theta
    offset = np.arctan2((w * np.sin(d)).sum(), (w * np.cos(d)).sum())
    return float(grid_theta + offset)


def assemble_transform(theta: float, C0, t_parallel, frame: GravityFrame, t_perp_hat=None):
    """Lift the planar rotation and pole back to a 3-D rotation and translation.

    With a finite pole ``C0`` the planar translation is ``(I - R_theta) C0``.
    When ``C0`` is ``None`` (pole at infinity) the caller must supply
    ``t_perp_hat`` and ``theta`` is expected to be 0.
    Returns ``(R, t)``.
    """
    if C0 is not None:
        t_hat = (np.eye(2) - rotation_2d(theta)) @ np.asarray(C0, dtype=np.float64)
    else:
        if t_perp_hat is None:
            raise ValueError("pole at infinity needs an explicit planar translation")
        t_hat = np.asarray(t_perp_hat, dtype=np.float64)
    R = frame.to_ez.T @ rotation_z(theta) @ frame.to_ez @ frame.align
    R = orthonormalize(R)
    t = frame.to_ez.T @ np.array([t_hat[0], t_hat[1], 0.0]) + np.asarray(t_parallel, dtype=np.float64)
    return R, t
