"""4-DOF RANSAC baseline with a two-point minimal solver.

After aligning gravity, two correspondences fix the yaw (from the planar
direction of the segment between them) and the translation (from their mean).
"""
from __future__ import annotations

import math
import time

import numpy as np

from .errors import NoConsensus
from .geometry import GravityFrame, orthonormalize, rotation_z
from .pipeline import RegistrationResult
from .stabbing import CorrespondenceSet
from .synth import make_rng


def _yaw(d_src: np.ndarray, d_tgt: np.ndarray) -> np.ndarray:
    a = np.arctan2(d_src[..., 1], d_src[..., 0])
    b = np.arctan2(d_tgt[..., 1], d_tgt[..., 0])
    return b - a


def _fit(P: np.ndarray, Q: np.ndarray):
    """Least-squares yaw and translation in the gravity-up frame."""
    pc, qc = P.mean(axis=0), Q.mean(axis=0)
    u, v = P[:, :2] - pc[:2], Q[:, :2] - qc[:2]
    theta = math.atan2(float(np.sum(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])), float(np.sum(u * v)))
    Rz = rotation_z(theta)
    return theta, qc - Rz @ pc


def ransac_baseline(
    C: CorrespondenceSet,
    epsilon: float,
    max_iterations: int = 10_000,
    seed: int = 0,
    confidence: float | None = None,
    refit_rounds: int = 2,
) -> RegistrationResult:
    """Consensus search over random two-point hypotheses.

    ``confidence`` enables the usual adaptive stop once enough hypotheses have
    been drawn for the current best inlier ratio; ``None`` spends the whole
    budget. Ties between hypotheses go to the earliest drawn.
    """
    n = len(C)
    if n < 2:
        raise NoConsensus("RANSAC needs at least two correspondences")
    frame = GravityFrame.from_gravity(C.gravity)
    P = C.p @ (frame.to_ez @ frame.align).T
    Q = C.q @ frame.to_ez.T
    rng = make_rng(seed)
    t0 = time.perf_counter()

    best_count, best = -1, None
    batch = max(1, min(max_iterations, 2_000_000 // n))
    done = 0
    budget = max_iterations
    while done < budget:
        b = min(batch, budget - done)
        i = rng.integers(0, n, size=b)
        j = (i + 1 + rng.integers(0, n - 1, size=b)) % n
        theta = _yaw(P[j] - P[i], Q[j] - Q[i])
        c, s = np.cos(theta), np.sin(theta)
        # rotated source points for every hypothesis: (b, n, 2)
        rx = c[:, None] * P[None, :, 0] - s[:, None] * P[None, :, 1]
        ry = s[:, None] * P[None, :, 0] + c[:, None] * P[None, :, 1]
        tx = 0.5 * (Q[i, 0] + Q[j, 0] - (c * (P[i, 0] + P[j, 0]) - s * (P[i, 1] + P[j, 1])))
        ty = 0.5 * (Q[i, 1] + Q[j, 1] - (s * (P[i, 0] + P[j, 0]) + c * (P[i, 1] + P[j, 1])))
        tz = 0.5 * (Q[i, 2] + Q[j, 2] - P[i, 2] - P[j, 2])
        dx = Q[None, :, 0] - rx - tx[:, None]
        dy = Q[None, :, 1] - ry - ty[:, None]
        dz = Q[None, :, 2] - P[None, :, 2] - tz[:, None]
        counts = np.count_nonzero(dx * dx + dy * dy + dz * dz <= epsilon * epsilon, axis=1)
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_count = int(counts[k])
            best = (float(theta[k]), np.array([tx[k], ty[k], tz[k]]))
            if confidence is not None:
                w = best_count / n
                need = math.log(1 - confidence) / math.log(max(1e-300, 1 - w * w)) if w < 1 else 0
                budget = min(max_iterations, max(done + b, int(math.ceil(need))))
        done += b

    if best_count <= 2:
        raise NoConsensus(f"best RANSAC hypothesis has only {best_count} inliers")

    theta, t = best

    def inliers_of(theta, t):
        r = Q - P @ rotation_z(theta).T - t
        return np.flatnonzero(np.einsum("ij,ij->i", r, r) <= epsilon * epsilon)

    inl = inliers_of(theta, t)
    for _ in range(refit_rounds):
        if inl.size < 2:
            break
        cand = _fit(P[inl], Q[inl])
        new = inliers_of(*cand)
        if new.size < inl.size:
            break
        (theta, t), inl = cand, new

    R = orthonormalize(frame.to_ez.T @ rotation_z(theta) @ frame.to_ez @ frame.align)
    elapsed = time.perf_counter() - t0
    return RegistrationResult(
        rotation=R,
        translation=frame.to_ez.T @ t,
        theta_star=theta,
        theta_grid=theta,
        l_star=float(t[2]),
        inliers_stage1=inl,
        inliers_stage2=inl,
        inliers_stage3=inl,
        pole=None,
        timings={"stage1": elapsed, "stage2": 0.0, "stage3": 0.0},
        diagnostics={"iterations": done},
    )
