"""Seeded benchmark campaigns with CSV output.

A campaign is a JSON object::

    {
      "scenario": "outlier-sweep",
      "trials": 50,
      "seed": 0,
      "method": "ours",                 # or "ransac"
      "grid": {"N": [2000], "eta": [0.9, 0.98], "sigma": [0.005]},
      "thresholds": {"re_deg": 1.0, "te_m": 0.01}
    }

``grid`` expands to the product of its lists; ``cells`` may instead give an
explicit list of parameter dicts. Any ``SynthConfig`` field may appear, plus
``gravity_noise_deg``, ``ransac_iterations`` and ``ransac_epsilon``. Trial ``k``
of every cell uses seed ``seed + k``.
"""
from __future__ import annotations

import csv
import io as _io
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import NoConsensus, ParseError
from .pipeline import RegistrationConfig, register
from .ransac import ransac_baseline
from .spcr import PointCloudPair, solve_spcr
from .stabbing import CorrespondenceSet
from .synth import CORR, SPCR, SynthConfig, generate, gravity_noise_perturb, rotation_error, translation_error

CSV_COLUMNS = (
    "scenario", "seed", "N", "eta", "sigma", "rho",
    "stage1_ms", "stage2_ms", "stage3_ms", "total_ms",
    "re_deg", "te_m", "success", "inliers1", "inliers2", "inliers3", "bnb_branches",
)
_SYNTH_FIELDS = {f.name for f in fields(SynthConfig)}
_EXTRA_FIELDS = {"gravity_noise_deg", "ransac_iterations", "ransac_epsilon", "delta", "tau"}


@dataclass(frozen=True)
class Campaign:
    scenario: str
    cells: list
    trials: int = 10
    seed: int = 0
    method: str = "ours"
    re_max: float = 1.0
    te_max: float = 0.01
    threads: int = 1

    @classmethod
    def from_dict(cls, spec: dict) -> "Campaign":
        if not isinstance(spec, dict) or not spec:
            raise ValueError("campaign spec is empty")
        if "cells" in spec:
            cells = [dict(c) for c in spec["cells"]]
        elif "grid" in spec:
            grid = spec["grid"]
            if not isinstance(grid, dict) or not grid:
                raise ValueError("campaign grid is empty")
            keys = list(grid)
            cells = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
        else:
            raise ValueError("campaign needs 'grid' or 'cells'")
        if not cells:
            raise ValueError("campaign has no cells")
        for cell in cells:
            unknown = set(cell) - _SYNTH_FIELDS - _EXTRA_FIELDS
            if unknown:
                raise ValueError(f"unknown cell parameters: {sorted(unknown)}")
        thr = spec.get("thresholds", {})
        method = spec.get("method", "ours")
        if method not in ("ours", "ransac"):
            raise ValueError(f"unknown method {method!r}")
        trials = int(spec.get("trials", 10))
        if trials < 1:
            raise ValueError("trials must be at least 1")
        return cls(
            scenario=str(spec.get("scenario", "campaign")),
            cells=cells,
            trials=trials,
            seed=int(spec.get("seed", 0)),
            method=method,
            re_max=float(thr.get("re_deg", 1.0)),
            te_max=float(thr.get("te_m", 0.01)),
            threads=int(spec.get("threads", 1)),
        )

    @classmethod
    def load(cls, path) -> "Campaign":
        try:
            with open(path, encoding="utf-8") as fh:
                spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(path, exc.lineno, exc.msg) from None
        try:
            return cls.from_dict(spec)
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from None


@dataclass
class TrialResult:
    row: dict
    re_deg: float = math.nan
    te_m: float = math.nan
    success: bool = False
    extra: dict = field(default_factory=dict)


def _thresholds(cell: dict, sigma: float):
    sigma_eff = sigma if sigma > 0 else 1e-4
    delta = cell.get("delta", 3.0 * sigma_eff)
    tau = cell.get("tau")
    cfg = RegistrationConfig.from_sigma(sigma_eff, delta=delta) if tau is None else RegistrationConfig(delta=delta, tau=tau)
    return cfg, sigma_eff


def run_trial(scenario: str, cell: dict, seed: int, method: str = "ours",
              re_max: float = 1.0, te_max: float = 0.01, threads: int = 1) -> TrialResult:
    synth = SynthConfig(**{k: (tuple(v) if k == "axis" else v) for k, v in cell.items() if k in _SYNTH_FIELDS}, seed=seed)
    inst = generate(synth)
    cfg, sigma_eff = _thresholds(cell, synth.sigma)
    if threads != 1:
        cfg = replace(cfg, threads=threads)
    gravity = inst.gravity
    if cell.get("gravity_noise_deg", 0):
        gravity = gravity_noise_perturb(gravity, float(cell["gravity_noise_deg"]), seed)

    row = {
        "scenario": scenario, "seed": seed, "N": synth.N if synth.mode == CORR else synth.M,
        "eta": synth.eta, "sigma": synth.sigma, "rho": synth.rho,
        "stage1_ms": math.nan, "stage2_ms": math.nan, "stage3_ms": math.nan, "total_ms": math.nan,
        "re_deg": math.nan, "te_m": math.nan, "success": 0,
        "inliers1": 0, "inliers2": 0, "inliers3": 0, "bnb_branches": 0,
    }
    try:
        if synth.mode == SPCR:
            res = solve_spcr(PointCloudPair(inst.source, inst.target, gravity), cfg)
        else:
            C = CorrespondenceSet(inst.source, inst.target, gravity)
            if method == "ransac":
                eps = cell.get("ransac_epsilon", 5.0 * sigma_eff)
                res = ransac_baseline(C, eps, int(cell.get("ransac_iterations", 10_000)), seed=seed)
            else:
                res = register(C, cfg)
    except NoConsensus:
        return TrialResult(row)

    re = rotation_error(inst.truth.rotation, res.rotation)
    te = translation_error(inst.truth.translation, res.translation)
    ok = re <= re_max and te <= te_max
    row.update(
        stage1_ms=1e3 * res.timings.get("stage1", 0.0),
        stage2_ms=1e3 * res.timings.get("stage2", 0.0),
        stage3_ms=1e3 * res.timings.get("stage3", 0.0),
        total_ms=1e3 * res.total_time,
        re_deg=re, te_m=te, success=int(ok),
        inliers1=len(res.inliers_stage1), inliers2=len(res.inliers_stage2), inliers3=len(res.inliers_stage3),
        bnb_branches=res.pole.branches_expanded if res.pole is not None else 0,
    )
    return TrialResult(row, re, te, ok)


def _run_task(args):
    return run_trial(*args).row


def run_campaign(campaign: Campaign, workers: int = 1) -> list[dict]:
    """One row per trial, ordered by cell then seed regardless of ``workers``."""
    tasks = [
        (campaign.scenario, cell, campaign.seed + k, campaign.method, campaign.re_max, campaign.te_max, campaign.threads)
        for cell in campaign.cells
        for k in range(campaign.trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_task, tasks))
    return [_run_task(t) for t in tasks]


TIMING_COLUMNS = ("stage1_ms", "stage2_ms", "stage3_ms", "total_ms")


def strip_timings(rows: list[dict]) -> list[dict]:
    return [{**r, **{c: math.nan for c in TIMING_COLUMNS}} for r in rows]


def _cell_key(row):
    return (row["N"], row["eta"], row["sigma"], row["rho"])


def summarize(rows: list[dict]) -> list[dict]:
    """Per-cell success rate, median runtime and error quantiles."""
    out = []
    for key, group in itertools.groupby(sorted(rows, key=_cell_key), key=_cell_key):
        group = list(group)
        re = np.array([r["re_deg"] for r in group], dtype=float)
        te = np.array([r["te_m"] for r in group], dtype=float)
        tot = np.array([r["total_ms"] for r in group], dtype=float)
        finite = np.isfinite(re)
        out.append({
            "N": key[0], "eta": key[1], "sigma": key[2], "rho": key[3],
            "trials": len(group),
            "success_rate": float(np.mean([r["success"] for r in group])),
            "median_total_ms": float(np.nanmedian(tot)) if finite.any() else math.nan,
            "median_re_deg": float(np.median(re[finite])) if finite.any() else math.nan,
            "median_te_m": float(np.median(te[finite])) if finite.any() else math.nan,
            "max_re_deg": float(re[finite].max()) if finite.any() else math.nan,
            "max_te_m": float(te[finite].max()) if finite.any() else math.nan,
        })
    return out


def _csv_value(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def rows_to_csv(rows: list[dict], columns=CSV_COLUMNS) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_csv_value(r[c]) for c in columns])
    return buf.getvalue()


def write_csv(rows: list[dict], path, columns=CSV_COLUMNS) -> None:
    from .io import atomic_write

    try:
        with atomic_write(path) as fh:
            fh.write(rows_to_csv(rows, columns))
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def default_workers() -> int:
    return max(1, int(os.environ.get("SCREWREG_WORKERS", "1")))
