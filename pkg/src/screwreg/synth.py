"""Seeded synthetic instances, error metrics and gravity perturbation.

Random numbers come from numpy's ``Generator(PCG64(seed))``; instances can also
be written to disk with :mod:`screwreg.io` for exact cross-checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GravityPair, RigidTransform, normalize, perpendicular_axis, rotation_about_axis
from .stabbing import CorrespondenceSet

CORR = "corr"
SPCR = "spcr"


@dataclass(frozen=True)
class SynthConfig:
    N: int = 2000
    eta: float = 0.0
    sigma: float = 0.0
    seed: int = 0
    axis: tuple = (0.0, 0.0, 1.0)
    translation_range: float = 1.0
    mode: str = CORR
    rho: float = 1.0
    M: int = 234

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ValueError("eta must lie in [0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must lie in (0, 1]")
        if self.mode not in (CORR, SPCR):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class SynthInstance:
    config: SynthConfig
    truth: RigidTransform
    gravity: GravityPair
    source: np.ndarray
    target: np.ndarray
    # CORR: bool per correspondence. SPCR: source index of each target point.
    labels: np.ndarray

    @property
    def correspondences(self) -> CorrespondenceSet:
        if self.config.mode != CORR:
            raise ValueError("correspondence-free instance has no correspondence set")
        return CorrespondenceSet(self.source, self.target, self.gravity)

    @property
    def inlier_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _random_truth(rng, cfg: SynthConfig):
    axis = normalize(cfg.axis)
    angle = rng.uniform(-np.pi, np.pi)
    R = rotation_about_axis(axis, angle)
    t = rng.uniform(-cfg.translation_range, cfg.translation_range, size=3)
    g = -axis
    return RigidTransform(R, t), GravityPair(g, R @ g)


def generate(cfg: SynthConfig) -> SynthInstance:
    rng = make_rng(cfg.seed)
    truth, gravity = _random_truth(rng, cfg)
    if cfg.mode == CORR:
        src = rng.uniform(-1.0, 1.0, size=(cfg.N, 3))
        tgt = truth.apply(src)
        n_out = int(round(cfg.eta * cfg.N))
        out_idx = rng.permutation(cfg.N)[:n_out]
        tgt[out_idx] = rng.uniform(-1.0, 1.0, size=(n_out, 3))
        labels = np.ones(cfg.N, dtype=bool)
        labels[out_idx] = False
        if cfg.sigma > 0:
            src = src + rng.normal(0.0, cfg.sigma, size=src.shape)
            tgt = tgt + rng.normal(0.0, cfg.sigma, size=tgt.shape)
        return SynthInstance(cfg, truth, gravity, src, tgt, labels)

    src = rng.uniform(-1.0, 1.0, size=(cfg.M, 3))
    keep = math.ceil(cfg.rho * cfg.M - 1e-9)
    kept = np.sort(rng.permutation(cfg.M)[:keep])
    tgt = truth.apply(src[kept])
    if cfg.sigma > 0:
        tgt = tgt + rng.normal(0.0, cfg.sigma, size=tgt.shape)
    return SynthInstance(cfg, truth, gravity, src, tgt, kept)


def rotation_error(R_gt, R_est) -> float:
    """Geodesic angle between two rotations, in degrees.

    Equal to ``arccos((tr(R_gt^T R_est) - 1) / 2)`` but evaluated with atan2 so
    that errors below ~1e-6 degrees are not swallowed by arccos near 1.
    """
    M = np.asarray(R_gt, dtype=np.float64).T @ np.asarray(R_est, dtype=np.float64)
    c = (np.trace(M) - 1.0) / 2.0
    s = 0.5 * np.linalg.norm([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])
    return float(np.degrees(np.arctan2(s, c)))


def translation_error(t_gt, t_est) -> float:
    return float(np.linalg.norm(np.asarray(t_gt, dtype=np.float64) - np.asarray(t_est, dtype=np.float64)))


def gravity_noise_perturb(gravity: GravityPair, angle_std_deg: float, seed: int) -> GravityPair:
    """Tilt each gravity vector about a random perpendicular axis.

    The tilt angle is drawn from ``N(0, angle_std_deg)``, so the angular
    deviation of each vector is half-normal.
    """
    if angle_std_deg < 0:
        raise ValueError("angle_std_deg must be non-negative")
    if angle_std_deg == 0:
        return gravity
    rng = make_rng(seed)

    def tilt(v):
        u = perpendicular_axis(v)
        w = np.cross(v, u)
        phi = rng.uniform(0.0, 2 * np.pi)
        axis = np.cos(phi) * u + np.sin(phi) * w
        angle = np.radians(rng.normal(0.0, angle_std_deg))
        return normalize(rotation_about_axis(axis, angle) @ v)

    return GravityPair(tilt(gravity.v_p), tilt(gravity.v_q))


def true_pole(truth: RigidTransform, gravity: GravityPair) -> np.ndarray:
    """Homogeneous unit pole of the ground-truth motion, on the upper hemisphere."""
    from .geometry import GravityFrame, rotation_2d

    frame = GravityFrame.from_gravity(gravity)
    planar = frame.to_ez @ truth.rotation @ frame.align.T @ frame.to_ez.T
    theta = np.arctan2(planar[1, 0], planar[0, 0])
    t = frame.to_ez @ truth.translation
    A = np.eye(2) - rotation_2d(theta)
    if abs(np.linalg.det(A)) < 1e-15:
        C = np.array([-t[1], t[0], 0.0])  # pure translation: pole at infinity
    else:
        C = np.append(np.linalg.solve(A, t[:2]), 1.0)
    C = C / np.linalg.norm(C)
    return -C if C[2] < 0 else C


def calibrate_tau(sigma: float, N: int = 2000, eta: float = 0.9, trials: int = 50,
                  quantile: float = 0.99, seed: int = 0) -> float:
    """Pole-residual threshold covering ``quantile`` of true inliers at noise ``sigma``.

    Residuals ``|n_i . C|`` of the labelled inliers are measured at the
    ground-truth pole over ``trials`` generated instances.
    """
    from .pole import bisectors, project_to_plane

    res = []
    for k in range(trials):
        inst = generate(SynthConfig(N=N, eta=eta, sigma=sigma, seed=seed + k))
        lines = bisectors(project_to_plane(inst.correspondences, inst.inlier_indices))
        res.append(np.abs(lines.n @ true_pole(inst.truth, inst.gravity)))
    return float(np.quantile(np.concatenate(res), quantile))
