"""Command-line front end.

Exit codes: 0 on success, 2 when no consensus is found, 1 for usage, parse
and I/O errors.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, io
from .errors import NoConsensus, RegistrationError
from .geometry import GravityPair
from .pipeline import TAU_PER_SIGMA, RegistrationConfig, register
from .spcr import PointCloudPair, solve_spcr
from .synth import CORR, SPCR, SynthConfig, generate, rotation_error, translation_error

EXIT_OK, EXIT_ERROR, EXIT_NO_CONSENSUS = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _vec3(text: str) -> np.ndarray:
    try:
        v = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if v.shape != (3,) or not np.isfinite(v).all() or np.linalg.norm(v) == 0:
        raise argparse.ArgumentTypeError(f"expected a non-zero x,y,z vector, got {text!r}")
    return v


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("SCREWREG_THREADS", "1")))
    except ValueError:
        return 1


def _add_solver_flags(p):
    p.add_argument("--gravity-p", type=_vec3, default="0,0,-1", help="source gravity x,y,z")
    p.add_argument("--gravity-q", type=_vec3, default="0,0,-1", help="target gravity x,y,z")
    p.add_argument("--sigma", type=_positive, help="noise level; sets delta = 3 sigma unless --delta is given")
    p.add_argument("--delta", type=_positive, help="axial inlier threshold")
    p.add_argument("--tau", type=_positive, help="pole inlier threshold")
    p.add_argument("--tau-auto", action="store_true", help=f"use tau = {TAU_PER_SIGMA:g} sigma")
    p.add_argument("--s", type=int, default=360, help="number of angle bins")
    p.add_argument("--gamma-min", type=_positive, default=1e-6)
    p.add_argument("--w-min", type=_positive, default=1e-6)
    p.add_argument("--threads", type=int, default=_default_threads(), help="bound-evaluation threads (env SCREWREG_THREADS)")
    p.add_argument("--out", type=Path, help="result file")
    p.add_argument("--truth", type=Path, help="ground-truth transform file; prints RE and TE")
    p.add_argument("--timings", action="store_true", help="include stage timings in the result file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="screwreg", description="Gravity-aware 4-DOF point cloud registration.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("register", help="register a correspondence file")
    p.add_argument("correspondences", type=Path)
    p.add_argument("--source", type=Path, help="source cloud for index correspondences")
    p.add_argument("--target", type=Path, help="target cloud for index correspondences")
    _add_solver_flags(p)

    p = sub.add_parser("register-spcr", help="register two clouds without correspondences")
    p.add_argument("source", type=Path)
    p.add_argument("target", type=Path)
    p.add_argument("--voxel", type=_positive, help="voxel size for downsampling both clouds")
    _add_solver_flags(p)

    p = sub.add_parser("synth", help="write a synthetic instance")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--mode", choices=(CORR, SPCR), default=CORR)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--m", type=int, default=234, help="source size in spcr mode")
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--axis", type=_vec3, default="0,0,1")
    p.add_argument("--translation-range", type=float, default=1.0)

    p = sub.add_parser("bench", help="run a benchmark campaign")
    p.add_argument("spec", type=Path, help="campaign JSON file")
    p.add_argument("--out", type=Path, required=True, help="CSV output")
    p.add_argument("--workers", type=int, default=bench.default_workers(), help="parallel trial processes")
    p.add_argument("--no-timings", action="store_true", help="write timing columns as nan for reproducible files")
    return parser


def _config(args) -> RegistrationConfig:
    delta = args.delta if args.delta is not None else (3.0 * args.sigma if args.sigma else None)
    if delta is None:
        raise UsageError("--delta is required unless --sigma is given")
    if args.tau is not None:
        tau = args.tau
    elif args.tau_auto:
        if args.sigma is None:
            raise UsageError("--tau-auto needs --sigma")
        tau = TAU_PER_SIGMA * args.sigma
    else:
        raise UsageError("--tau is required unless --tau-auto is given")
    if args.s < 4:
        raise UsageError("--s must be at least 4")
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    return RegistrationConfig(delta=delta, tau=tau, s=args.s, gamma_min=args.gamma_min,
                              w_min=args.w_min, threads=args.threads)


def _gravity(args) -> GravityPair:
    return GravityPair.from_vectors(args.gravity_p, args.gravity_q)


def _report(args, res) -> None:
    print(f"inliers {len(res.inliers_stage1)} {len(res.inliers_stage2)} {len(res.inliers_stage3)}")
    print(f"theta_star {res.theta_star:.12g}")
    print("rotation " + " ".join(f"{v:.12g}" for v in res.rotation.reshape(9)))
    print("translation " + " ".join(f"{v:.12g}" for v in res.translation))
    print(f"time_ms {1e3 * res.total_time:.3f}")
    if args.truth is not None:
        truth = io.read_result(args.truth)
        print(f"re_deg {rotation_error(truth['rotation'], res.rotation):.6g}")
        print(f"te_m {translation_error(truth['translation'], res.translation):.6g}")
    if args.out is not None:
        io.write_result(res, args.out, timings=args.timings)


def cmd_register(args) -> int:
    cfg = _config(args)
    src = tgt = None
    if (args.source is None) != (args.target is None):
        raise UsageError("--source and --target must be given together")
    if args.source is not None:
        src, tgt = io.read_cloud(args.source), io.read_cloud(args.target)
    C = io.read_correspondences(args.correspondences, src, tgt, _gravity(args))
    _report(args, register(C, cfg))
    return EXIT_OK


def cmd_register_spcr(args) -> int:
    cfg = _config(args)
    pair = PointCloudPair(io.read_cloud(args.source), io.read_cloud(args.target), _gravity(args))
    _report(args, solve_spcr(pair, cfg, voxel=args.voxel))
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        cfg = SynthConfig(N=args.n, eta=args.eta, sigma=args.sigma, seed=args.seed, axis=tuple(args.axis),
                          translation_range=args.translation_range, mode=args.mode, rho=args.rho, M=args.m)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    inst = generate(cfg)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == CORR:
        io.write_correspondences(inst.correspondences, out / "corr.txt")
        labels = inst.labels.astype(np.int64)
    else:
        io.write_cloud(inst.source, out / "source.xyz")
        io.write_cloud(inst.target, out / "target.xyz")
        labels = inst.labels
    io.write_transform(inst.truth.rotation, inst.truth.translation, out / "truth.txt")
    with io.atomic_write(out / "labels.txt") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)
    io.write_record({
        "mode": cfg.mode, "N": cfg.N, "M": cfg.M, "eta": cfg.eta, "sigma": cfg.sigma, "rho": cfg.rho,
        "seed": cfg.seed, "axis": np.asarray(cfg.axis, dtype=float), "translation_range": cfg.translation_range,
        "gravity_p": inst.gravity.v_p, "gravity_q": inst.gravity.v_q,
    }, out / "instance.txt")
    print(f"wrote {cfg.mode} instance to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        campaign = bench.Campaign.load(args.spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = bench.run_campaign(campaign, workers=max(1, args.workers))
    summary = bench.summarize(rows)
    if args.no_timings:
        rows = bench.strip_timings(rows)
    bench.write_csv(rows, args.out)
    for s in summary:
        print(f"N={s['N']} eta={s['eta']} sigma={s['sigma']} rho={s['rho']} "
              f"success={s['success_rate']:.3f} median_ms={s['median_total_ms']:.2f} "
              f"median_re={s['median_re_deg']:.4g} median_te={s['median_te_m']:.4g}")
    return EXIT_OK


COMMANDS = {
    "register": cmd_register,
    "register-spcr": cmd_register_spcr,
    "synth": cmd_synth,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NoConsensus as exc:
        print(f"screwreg: no consensus: {exc}", file=sys.stderr)
        return EXIT_NO_CONSENSUS
    except FileNotFoundError as exc:
        print(f"screwreg: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_ERROR
    except (UsageError, RegistrationError, ValueError, OSError) as exc:
        print(f"screwreg: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
