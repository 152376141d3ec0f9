"""Three-stage correspondence-based registration."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NoConsensus
from .geometry import GravityFrame
from .pole import BnbConfig, PoleResult, solve_stage2
from .stabbing import CorrespondenceSet, solve_stage1
from .voting import AngleVoteConfig, assemble_transform, per_pair_angles, refine_theta, vote_angle

# 99th percentile of true-inlier pole residuals is ~3.68 sigma (screwreg.synth.calibrate_tau)
TAU_PER_SIGMA = 4.0


@dataclass(frozen=True)
class RegistrationConfig:
    delta: float
    tau: float
    s: int = 360
    gamma_min: float = 1e-6
    w_min: float = 1e-6
    threads: int = 1
    refine_theta: bool = True
    refine_pole: bool = True
    refine_translation: bool = True
    min_inliers: int = 3

    def __post_init__(self):
        for name in ("delta", "tau", "gamma_min", "w_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_sigma(cls, sigma: float, **kw) -> "RegistrationConfig":
        """Thresholds derived from the noise level: ``delta = 3 sigma`` and ``tau = TAU_PER_SIGMA sigma``."""
        if sigma <= 0:
            raise ValueError("sigma must be positive; pass delta and tau explicitly for noise-free data")
        kw.setdefault("delta", 3.0 * sigma)
        kw.setdefault("tau", TAU_PER_SIGMA * sigma)
        return cls(**kw)

    @property
    def bnb(self) -> BnbConfig:
        return BnbConfig(gamma_min=self.gamma_min, threads=self.threads)


@dataclass
class RegistrationResult:
    rotation: np.ndarray
    translation: np.ndarray
    theta_star: float
    theta_grid: float
    l_star: float
    inliers_stage1: np.ndarray
    inliers_stage2: np.ndarray
    inliers_stage3: np.ndarray
    pole: PoleResult | None
    timings: dict = field(default_factory=dict)
    pairs: np.ndarray | None = None  # (K, 2) source/target indices in correspondence-free mode
    diagnostics: dict = field(default_factory=dict)

    @property
    def total_time(self) -> float:
        return float(sum(self.timings.values()))


def _stage3(pc, pole: PoleResult, t_parallel, frame: GravityFrame, cfg: RegistrationConfig):
    """Returns ``(R, t, theta, theta_grid, inliers3)``."""
    mask = np.isin(pc.owner, pole.inliers)
    p_hat, q_hat, owner = pc.p_hat[mask], pc.q_hat[mask], pc.owner[mask]
    if pole.at_infinity:
        t_hat = np.median(q_hat - p_hat, axis=0)
        R, t = assemble_transform(0.0, None, t_parallel, frame, t_perp_hat=t_hat)
        return R, t, 0.0, 0.0, owner
    angles, valid = per_pair_angles(p_hat, q_hat, pole.C0)
    if not valid.any():
        raise NoConsensus("every pole inlier coincides with the pole")
    angles, owner = angles[valid], owner[valid]
    grid_theta, pos = vote_angle(angles, AngleVoteConfig(cfg.s))
    theta = grid_theta
    if cfg.refine_theta:
        lever = np.hypot(*(p_hat[valid][pos] - pole.C0).T) * np.hypot(*(q_hat[valid][pos] - pole.C0).T)
        theta = refine_theta(angles[pos], grid_theta, lever)
    R, t = assemble_transform(theta, pole.C0, t_parallel, frame)
    return R, t, theta, grid_theta, owner[pos]


def refit_translation(C: CorrespondenceSet, R: np.ndarray, inliers, radius: float) -> np.ndarray:
    """Translation for a fixed rotation over the final inliers.

    Starts from the componentwise median of ``q - R p`` and averages the
    members lying within ``radius`` of it. The angular vote alone is a weak
    filter when the pole is far away, so the median guards the mean.
    """
    idx = np.asarray(inliers, dtype=np.intp)
    d = C.q[idx] - C.p[idx] @ R.T
    t0 = np.median(d, axis=0)
    near = np.linalg.norm(d - t0, axis=1) <= radius
    return d[near].mean(axis=0) if near.any() else t0


def register_from_stage1(C: CorrespondenceSet, inl1, l_star: float, cfg: RegistrationConfig,
                         frame: GravityFrame | None = None, stage1_time: float = 0.0) -> RegistrationResult:
    """Run the pole search and angle vote on a Stage I inlier set."""
    frame = frame or GravityFrame.from_gravity(C.gravity)
    t_parallel = l_star * frame.v_q
    t1 = time.perf_counter()
    pole, pc = solve_stage2(C, inl1, cfg.tau, cfg.bnb, cfg.w_min, cfg.refine_pole, frame)
    t2 = time.perf_counter()
    R, t, theta, grid_theta, inl3 = _stage3(pc, pole, t_parallel, frame, cfg)
    if inl3.size < cfg.min_inliers:
        raise NoConsensus(f"only {inl3.size} consistent correspondences (need {cfg.min_inliers})")
    if cfg.refine_translation:
        t = refit_translation(C, R, inl3, 3.0 * cfg.delta)
    t3 = time.perf_counter()
    return RegistrationResult(
        rotation=R,
        translation=t,
        theta_star=theta,
        theta_grid=grid_theta,
        l_star=l_star,
        inliers_stage1=np.asarray(inl1),
        inliers_stage2=np.sort(pole.inliers),
        inliers_stage3=np.sort(inl3),
        pole=pole,
        timings={"stage1": stage1_time, "stage2": t2 - t1, "stage3": t3 - t2},
    )


def register(C: CorrespondenceSet, cfg: RegistrationConfig) -> RegistrationResult:
    """Estimate the 4-DOF transform mapping ``C.p`` onto ``C.q``."""
    frame = GravityFrame.from_gravity(C.gravity)
    t0 = time.perf_counter()
    _, inl1, l_star = solve_stage1(C, cfg.delta, frame)
    return register_from_stage1(C, inl1, l_star, cfg, frame, time.perf_counter() - t0)
