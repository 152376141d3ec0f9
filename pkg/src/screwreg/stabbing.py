"""Stage I: translation along the gravity axis by maximum interval stabbing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput
from .geometry import GravityFrame, GravityPair


@dataclass(frozen=True)
class CorrespondenceSet:
    """Putative correspondences ``p[i] <-> q[i]`` with the gravity prior."""

    p: np.ndarray
    q: np.ndarray
    gravity: GravityPair

    def __post_init__(self):
        p = np.ascontiguousarray(self.p, dtype=np.float64)
        q = np.ascontiguousarray(self.q, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3 or p.shape != q.shape:
            raise ValueError(f"p and q must both be (N, 3); got {p.shape} and {q.shape}")
        if not (np.isfinite(p).all() and np.isfinite(q).all()):
            raise ValueError("correspondences must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def __len__(self) -> int:
        return self.p.shape[0]

    def subset(self, idx) -> "CorrespondenceSet":
        return CorrespondenceSet(self.p[idx], self.q[idx], self.gravity)


@dataclass(frozen=True)
class IntervalSet:
    """Closed intervals ``[lo[k], hi[k]]`` owned by ``owner[k]``."""

    lo: np.ndarray
    hi: np.ndarray
    owner: np.ndarray

    def __len__(self) -> int:
        return self.lo.shape[0]

    @classmethod
    def from_pairs(cls, pairs) -> "IntervalSet":
        arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
        return cls(arr[:, 0].copy(), arr[:, 1].copy(), np.arange(arr.shape[0]))


@dataclass(frozen=True)
class StabResult:
    position: float
    count: int
    inliers: np.ndarray  # owners of the stabbed intervals, ascending


def axis_offsets(p_aligned: np.ndarray, q: np.ndarray, v_q: np.ndarray) -> np.ndarray:
    """Return ``v_q . (q - p')``, the axial displacement each pair would need."""
    return q @ v_q - p_aligned @ v_q


def build_axis_intervals(C: CorrespondenceSet, delta: float, frame: GravityFrame | None = None) -> IntervalSet:
    if delta <= 0:
        raise ValueError("delta must be positive")
    frame = frame or GravityFrame.from_gravity(C.gravity)
    centre = axis_offsets(C.p @ frame.align.T, C.q, frame.v_q)
    return IntervalSet(centre - delta, centre + delta, np.arange(len(C)))


def interval_stabbing(intervals: IntervalSet) -> StabResult:
    """Position stabbing the most closed intervals, in O(N log N).

    The reported position is the midpoint of the maximal-depth region; among
    equally deep regions the leftmost wins.
    """
    lo = np.asarray(intervals.lo, dtype=np.float64)
    hi = np.asarray(intervals.hi, dtype=np.float64)
    n = lo.shape[0]
    if n == 0:
        raise EmptyInput("interval_stabbing needs at least one interval")
    coords = np.concatenate([lo, hi])
    # starts sort before ends at equal coordinates so touching intervals overlap
    kind = np.concatenate([np.zeros(n, dtype=np.int8), np.ones(n, dtype=np.int8)])
    order = np.lexsort((kind, coords))
    depth = np.cumsum(np.where(kind[order] == 0, 1, -1))
    k = int(np.argmax(depth))
    left = coords[order[k]]
    right = coords[order[k + 1]]
    position = 0.5 * (left + right)
    mask = (lo <= position) & (position <= hi)
    inliers = np.sort(np.asarray(intervals.owner)[mask])
    return StabResult(float(position), int(depth[k]), inliers)


def solve_stage1(C: CorrespondenceSet, delta: float, frame: GravityFrame | None = None):
    """Estimate the axis-parallel translation.

    Returns ``(t_parallel, inliers, l_star)``.
    """
    frame = frame or GravityFrame.from_gravity(C.gravity)
    res = interval_stabbing(build_axis_intervals(C, delta, frame))
    return res.position * frame.v_q, res.inliers, res.position
