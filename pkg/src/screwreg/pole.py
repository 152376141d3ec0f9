"""Stage II: plane projection and globally optimal pole search.

Each projected correspondence constrains the pole to the perpendicular bisector
of the segment joining its two endpoints. Writing the pole homogeneously as a
unit vector ``C = (c_x, c_y, w)`` turns the search into consensus line fitting
``|n_i . C| <= tau`` on the upper hemisphere, solved by best-first
branch-and-bound over the exponential-map square ``[-pi/2, pi/2]^2``.
"""
from __future__ import annotations

import heapq
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import EmptyInput, NoConsensus
from .geometry import GravityFrame, exp_map
from .stabbing import CorrespondenceSet

HALF_PI = np.pi / 2
SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class PlaneCorrespondences:
    """Correspondences projected onto the plane orthogonal to the gravity axis."""

    p_hat: np.ndarray  # (K, 2)
    q_hat: np.ndarray  # (K, 2)
    owner: np.ndarray  # (K,) indices into the original correspondence set

    def __len__(self) -> int:
        return self.p_hat.shape[0]


@dataclass(frozen=True)
class BisectorLines:
    """Perpendicular bisectors ``a x + b y + c = 0`` stacked as rows of ``n``."""

    n: np.ndarray  # (K, 3)
    owner: np.ndarray
    degenerate: np.ndarray  # (K,) bool, |(a, b)| below the degeneracy threshold

    def __len__(self) -> int:
        return self.n.shape[0]


@dataclass
class PoleBranch:
    center: np.ndarray  # exponential-map coordinates
    half_side: float
    upper: int = 0
    lower: int = 0


@dataclass(frozen=True)
class BnbConfig:
    gamma_min: float = 1e-6
    threads: int = 1
    max_branches: int = 2_000_000


@dataclass
class PoleResult:
    C_hat: np.ndarray  # unit homogeneous pole on the upper hemisphere
    inliers: np.ndarray  # owners of the bisectors within tau of C_hat
    branches_expanded: int = 0
    final_gap: int = 0
    C0: np.ndarray | None = None  # None when the pole is at infinity
    refined: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def at_infinity(self) -> bool:
        return self.C0 is None


def project_to_plane(C: CorrespondenceSet, inliers=None, frame: GravityFrame | None = None) -> PlaneCorrespondences:
    """Rotate ``p' = R_align p`` and ``q`` into the gravity-up frame and drop z."""
    frame = frame or GravityFrame.from_gravity(C.gravity)
    idx = np.arange(len(C)) if inliers is None else np.asarray(inliers, dtype=np.intp)
    M = frame.to_ez @ frame.align
    p_t = C.p[idx] @ M.T
    q_t = C.q[idx] @ frame.to_ez.T
    return PlaneCorrespondences(
        np.ascontiguousarray(p_t[:, :2]), np.ascontiguousarray(q_t[:, :2]), idx
    )


def bisectors(pc: PlaneCorrespondences, degenerate_tol: float = 1e-12) -> BisectorLines:
    p, q = pc.p_hat, pc.q_hat
    a = q[:, 0] - p[:, 0]
    b = q[:, 1] - p[:, 1]
    c = -((p[:, 0] + q[:, 0]) / 2 * a + (p[:, 1] + q[:, 1]) / 2 * b)
    n = np.ascontiguousarray(np.column_stack([a, b, c]))
    return BisectorLines(n, np.asarray(pc.owner), np.hypot(a, b) < degenerate_tol)


def bisector(p_hat, q_hat) -> tuple[np.ndarray, bool]:
    """Single-pair form of :func:`bisectors`: returns ``(n, degenerate)``."""
    pc = PlaneCorrespondences(
        np.asarray(p_hat, dtype=np.float64).reshape(1, 2),
        np.asarray(q_hat, dtype=np.float64).reshape(1, 2),
        np.zeros(1, dtype=np.intp),
    )
    lines = bisectors(pc)
    return lines.n[0], bool(lines.degenerate[0])


class _LineData:
    """Per-line constants shared by every bound evaluation."""

    def __init__(self, lines: BisectorLines, tau: float):
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.n = np.ascontiguousarray(lines.n, dtype=np.float64)
        self.norms = np.linalg.norm(self.n, axis=1)
        # a constraint with |n| <= tau holds for every unit C
        self.always = (self.norms <= tau).astype(np.uint8)
        ratio = np.where(self.always.astype(bool), 0.0, tau / np.where(self.norms > 0, self.norms, 1.0))
        self.xi = np.ascontiguousarray(np.arcsin(np.clip(ratio, 0.0, 1.0)))
        self.tau = float(tau)
        self.all_idx = np.arange(self.n.shape[0], dtype=np.intp)

    def bounds(self, center, half_side, idx=None, backend=kernels):
        h = exp_map(center)
        return backend.bound_counts(
            self.n, self.norms, self.xi, self.always,
            self.all_idx if idx is None else idx, h, SQRT2 * half_side, self.tau,
        )


def bnb_bounds(branch: PoleBranch, lines: BisectorLines, tau: float) -> tuple[int, int]:
    """Upper and lower inlier-count bounds for ``branch`` over all ``lines``."""
    upper, lower, _ = _LineData(lines, tau).bounds(np.asarray(branch.center, dtype=np.float64), branch.half_side)
    return upper, lower


def inlier_count(lines: BisectorLines, h, tau: float) -> int:
    """Number of lines with ``|n . h| <= tau`` or ``|n| <= tau``."""
    r = np.abs(lines.n @ np.asarray(h, dtype=np.float64))
    return int(np.count_nonzero((r <= tau) | (np.linalg.norm(lines.n, axis=1) <= tau)))


def _outside_disk(center, half_side) -> bool:
    # closest point of the square to the origin
    d = np.maximum(np.abs(center) - half_side, 0.0)
    return float(np.hypot(d[0], d[1])) > HALF_PI


def bnb_search(lines: BisectorLines, tau: float, cfg: BnbConfig | None = None, on_branch=None) -> PoleResult:
    """Best-first branch-and-bound for the pole with the largest consensus.

    Children inherit their parent's candidate set: a line that cannot be
    satisfied anywhere in the parent square cannot be satisfied in a sub-square,
    so bounds are evaluated only over the parent's upper-bound contributors.
    Stops when the best upper bound in the queue no longer exceeds the incumbent,
    or when the best branch is narrower than ``gamma_min``.

    ``on_branch(PoleBranch)`` is called for every branch whose bounds are
    evaluated, in evaluation order.
    """
    cfg = cfg or BnbConfig()
    if len(lines) == 0:
        raise EmptyInput("bnb_search needs at least one line")
    data = _LineData(lines, tau)
    tie = itertools.count()
    root_c = np.zeros(2)
    root_g = HALF_PI
    upper, lower, cand = data.bounds(root_c, root_g)
    best_lower, best_center = lower, root_c
    if on_branch is not None:
        on_branch(PoleBranch(root_c, root_g, upper, lower))
    # heap entries: (-upper, -half_side, insertion order, center, candidates)
    heap = [(-upper, -root_g, next(tie), root_c, cand)]
    expanded = 0
    gap = 0
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        while heap:
            neg_up, neg_g, _, center, cand = heapq.heappop(heap)
            top_upper, gamma = -neg_up, -neg_g
            if top_upper <= best_lower:
                gap = 0
                break
            if gamma < cfg.gamma_min or expanded >= cfg.max_branches:
                gap = top_upper - best_lower
                break
            expanded += 1
            g = gamma / 2
            children = [center + np.array(o) * g for o in ((-1, -1), (1, -1), (-1, 1), (1, 1))]
            children = [c for c in children if not _outside_disk(c, g)]
            if pool is not None:
                results = list(pool.map(lambda c: data.bounds(c, g, cand), children))
            else:
                results = [data.bounds(c, g, cand) for c in children]
            for c, (up, low, sub) in zip(children, results):
                if on_branch is not None:
                    on_branch(PoleBranch(c, g, up, low))
                if low > best_lower:
                    best_lower, best_center = low, c
                if up > best_lower:
                    heapq.heappush(heap, (-up, -g, next(tie), c, sub))
    finally:
        if pool is not None:
            pool.shutdown()
    if best_lower == 0:
        raise NoConsensus("pole search found no consistent bisector")
    C_hat = exp_map(best_center)
    r = np.abs(data.n @ C_hat)
    mask = (r <= data.tau) | data.always.astype(bool)
    return PoleResult(
        C_hat=C_hat,
        inliers=np.asarray(lines.owner)[mask],
        branches_expanded=expanded,
        final_gap=int(gap),
    )


def refine_pole(lines: BisectorLines, C_hat: np.ndarray, inlier_mask: np.ndarray) -> np.ndarray | None:
    """Least-squares polish of the pole over an already fixed inlier set.

    Returns the unit vector minimising ``sum (n_i . C)^2`` over the inliers,
    on the upper hemisphere, or ``None`` if the inliers do not pin down a
    unique direction.
    """
    N = lines.n[inlier_mask & ~lines.degenerate]
    if N.shape[0] < 2:
        return None
    _, s, Vt = np.linalg.svd(N, full_matrices=False)
    if s.shape[0] < 3 or s[1] <= 1e-9 * s[0]:
        return None
    C = Vt[-1] / np.linalg.norm(Vt[-1])
    if C[2] < 0 or (C[2] == 0 and C @ C_hat < 0):
        C = -C
    return C


def recover_pole(C_hat, w_min: float = 1e-6) -> np.ndarray | None:
    """Euclidean pole from its homogeneous form; ``None`` means at infinity."""
    C_hat = np.asarray(C_hat, dtype=np.float64)
    w = C_hat[2]
    if abs(w) < w_min:
        return None
    return C_hat[:2] / w


def solve_stage2(
    C: CorrespondenceSet,
    stage1_inliers,
    tau: float,
    cfg: BnbConfig | None = None,
    w_min: float = 1e-6,
    refine: bool = True,
    frame: GravityFrame | None = None,
) -> tuple[PoleResult, PlaneCorrespondences]:
    """Project the Stage I inliers and search for the pole.

    Returns the pole result and the projected correspondences it refers to.
    """
    pc = project_to_plane(C, stage1_inliers, frame)
    lines = bisectors(pc)
    res = bnb_search(lines, tau, cfg)
    C_final = res.C_hat
    if refine:
        mask = np.isin(lines.owner, res.inliers)
        polished = refine_pole(lines, res.C_hat, mask)
        if polished is not None:
            C_final = polished
            res.refined = True
            res.extra["C_hat_bnb"] = res.C_hat
            # the polished pole can resolve consensus regions narrower than gamma_min
            near = (np.abs(lines.n @ polished) <= tau) | (np.linalg.norm(lines.n, axis=1) <= tau)
            if np.count_nonzero(near) >= res.inliers.size:
                res.extra["inliers_bnb"] = res.inliers
                res.inliers = np.asarray(lines.owner)[near]
    res.C_hat = C_final
    res.C0 = recover_pole(C_final, w_min)
    return res, pc
