"""Correspondence-free registration (simultaneous pose and correspondence).

Every source/target pair proposes an axial-translation interval. Merging the
intervals of each source point first means a stab counts each source point at
most once; the stabbed pairs then become putative correspondences for the pole
search and the angle vote.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyInput
from .geometry import GravityFrame, GravityPair
from .pipeline import RegistrationConfig, RegistrationResult, register_from_stage1
from .stabbing import CorrespondenceSet, IntervalSet, interval_stabbing


@dataclass(frozen=True)
class PointCloudPair:
    source: np.ndarray  # (M, 3)
    target: np.ndarray  # (N, 3)
    gravity: GravityPair

    def __post_init__(self):
        for name in ("source", "target"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
                raise ValueError(f"{name} must be a non-empty (K, 3) array, got {arr.shape}")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class MergedIntervals:
    """Disjoint intervals of one source point, each with its contributing targets."""

    lo: np.ndarray
    hi: np.ndarray
    targets: list


@dataclass(frozen=True)
class MergedIntervalSet:
    """Merged intervals of all source points.

    Targets are kept in the axial order ``order``; merged interval ``k`` covers
    targets ``order[first[k]:last[k] + 1]``.
    """

    lo: np.ndarray
    hi: np.ndarray
    owner: np.ndarray
    first: np.ndarray
    last: np.ndarray
    order: np.ndarray
    zp: np.ndarray  # axial coordinate of each aligned source point
    zq_sorted: np.ndarray  # axial coordinate of the targets, ascending
    delta: float

    def __len__(self) -> int:
        return self.lo.shape[0]

    def targets(self, k: int) -> np.ndarray:
        return self.order[self.first[k]:self.last[k] + 1]


def _axial(pair: PointCloudPair, frame: GravityFrame):
    zp = (pair.source @ frame.align.T) @ frame.v_q
    zq = pair.target @ frame.v_q
    return np.ascontiguousarray(zp), zq


def build_spcr_intervals(pair: PointCloudPair, delta: float, frame: GravityFrame | None = None):
    """Yield ``(i, IntervalSet)`` with the raw intervals of each source point.

    The interval owners are target indices. Rows are produced lazily so the
    full M x N set never has to exist at once.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    frame = frame or GravityFrame.from_gravity(pair.gravity)
    zp, zq = _axial(pair, frame)
    owners = np.arange(zq.shape[0])
    for i in range(zp.shape[0]):
        centre = zq - zp[i]
        yield i, IntervalSet(centre - delta, centre + delta, owners)


def merge_intervals(raw: IntervalSet) -> MergedIntervals:
    """Union of closed intervals; touching intervals are coalesced."""
    if len(raw) == 0:
        raise EmptyInput("merge_intervals needs at least one interval")
    order = np.lexsort((np.asarray(raw.hi), np.asarray(raw.lo)))
    lo = np.ascontiguousarray(np.asarray(raw.lo, dtype=np.float64)[order])
    hi = np.ascontiguousarray(np.asarray(raw.hi, dtype=np.float64)[order])
    mlo, mhi, first, last = kernels.merge_sorted(lo, hi)
    owners = np.asarray(raw.owner)[order]
    targets = [np.sort(owners[a:b + 1]) for a, b in zip(first, last)]
    return MergedIntervals(np.asarray(mlo), np.asarray(mhi), targets)


def merge_all(pair: PointCloudPair, delta: float, frame: GravityFrame | None = None) -> MergedIntervalSet:
    """Merged intervals for every source point, built row by row in the kernel."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    frame = frame or GravityFrame.from_gravity(pair.gravity)
    zp, zq = _axial(pair, frame)
    order = np.argsort(zq, kind="stable")
    zq_sorted = np.ascontiguousarray(zq[order])
    lo, hi, owner, first, last = kernels.spcr_merge(zp, zq_sorted, float(delta))
    return MergedIntervalSet(lo, hi, owner, first, last, order, zp, zq_sorted, float(delta))


@dataclass(frozen=True)
class SpcrStab:
    l_star: float
    count: int  # number of source points stabbed
    pairs: np.ndarray  # (K, 2) candidate (source, target) indices


def spcr_stab(merged: MergedIntervalSet) -> SpcrStab:
    """Stab the merged intervals and list the pairs whose raw interval holds the stab."""
    if len(merged) == 0:
        raise EmptyInput("no merged intervals to stab")
    res = interval_stabbing(IntervalSet(merged.lo, merged.hi, np.arange(len(merged))))
    l = res.position
    hit = res.inliers
    sizes = merged.last[hit] - merged.first[hit] + 1
    rows = np.repeat(merged.owner[hit], sizes)
    starts = np.repeat(merged.first[hit], sizes)
    offs = np.arange(sizes.sum()) - np.repeat(np.cumsum(sizes) - sizes, sizes)
    pos = starts + offs
    centre = merged.zq_sorted[pos] - merged.zp[rows]
    inside = (centre - merged.delta <= l) & (l <= centre + merged.delta)
    pairs = np.column_stack([rows[inside], merged.order[pos[inside]]])
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    return SpcrStab(l, int(np.unique(merged.owner[hit]).size), pairs)


def voxel_downsample(points: np.ndarray, voxel: float) -> np.ndarray:
    """Centroid of the points in each occupied voxel, ordered by voxel key."""
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    keys = np.floor(points / voxel).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((counts.shape[0], 3))
    np.add.at(sums, inverse, points)
    return sums / counts[:, None]


def solve_spcr(pair: PointCloudPair, cfg: RegistrationConfig, voxel: float | None = None) -> RegistrationResult:
    """Register two clouds without correspondences.

    The returned inlier index sets refer to rows of ``result.pairs``.
    """
    if voxel:
        pair = PointCloudPair(voxel_downsample(pair.source, voxel), voxel_downsample(pair.target, voxel), pair.gravity)
    frame = GravityFrame.from_gravity(pair.gravity)
    t0 = time.perf_counter()
    stab = spcr_stab(merge_all(pair, cfg.delta, frame))
    C = CorrespondenceSet(pair.source[stab.pairs[:, 0]], pair.target[stab.pairs[:, 1]], pair.gravity)
    t1 = time.perf_counter()
    res = register_from_stage1(C, np.arange(len(C)), stab.l_star, cfg, frame, t1 - t0)
    res.pairs = stab.pairs
    res.diagnostics["stab_count"] = stab.count
    return res
