"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from screwreg import kernels


def _bound_args(n, rng):
    nv = rng.normal(size=(n, 3))
    norms = np.linalg.norm(nv, axis=1)
    tau = 0.02
    always = (norms <= tau).astype(np.uint8)
    xi = np.arcsin(np.where(always.astype(bool), 0.0, np.clip(tau / norms, 0, 1)))
    h = np.array([0.1, -0.2, 0.97])
    h /= np.linalg.norm(h)
    return nv, norms, xi, always, np.arange(n, dtype=np.intp), h, 0.05, tau


def _merge_args(n, rng):
    lo = np.sort(rng.uniform(0, 100, n))
    return lo, lo + rng.uniform(0, 0.2, n)


def _spcr_args(m, rng):
    return rng.uniform(-1, 1, m), np.sort(rng.uniform(-1, 1, 4 * m)), 1e-5


CASES = {
    "bound_counts(n=100k)": ("bound_counts", lambda rng: _bound_args(100_000, rng)),
    "merge_sorted(n=100k)": ("merge_sorted", lambda rng: _merge_args(100_000, rng)),
    "spcr_merge(M=500)": ("spcr_merge", lambda rng: _spcr_args(500, rng)),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py = kernels.get_backend("python")
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        cy = None
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<24}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for label, (fn, make) in CASES.items():
        call_args = make(np.random.default_rng(0))
        t_py = min(timeit.repeat(lambda: getattr(py, fn)(*call_args), number=1, repeat=args.repeat))
        if cy is None:
            print(f"{label:<24}{1e3 * t_py:>12.3f}")
            continue
        t_cy = min(timeit.repeat(lambda: getattr(cy, fn)(*call_args), number=1, repeat=args.repeat))
        print(f"{label:<24}{1e3 * t_py:>12.3f}{1e3 * t_cy:>12.3f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
