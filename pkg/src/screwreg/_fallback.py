"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Both implementations must return bit-identical results; ``tests/test_kernels.py``
checks this whenever the extension is importable.
"""
import numpy as np

HALF_PI = np.pi / 2


def bound_counts(n, norms, xi, degenerate, idx, h, spread, tau):
    """Upper/lower consensus bounds for one pole branch.

    Only lines in ``idx`` are considered. Returns ``(upper, lower, candidates)``
    where ``candidates`` are the members of ``idx`` counted in the upper bound.
    """
    sub = n[idx]
    r = np.abs(sub[:, 0] * h[0] + sub[:, 1] * h[1] + sub[:, 2] * h[2])
    ang = spread + xi[idx]
    psi = np.where(ang >= HALF_PI, norms[idx], norms[idx] * np.sin(np.minimum(ang, HALF_PI)))
    psi = np.maximum(psi, tau)
    deg = degenerate[idx].astype(bool)
    up = deg | (r <= psi)
    low = deg | (r <= tau)
    return int(np.count_nonzero(up)), int(np.count_nonzero(low)), idx[up]


def merge_sorted(lo, hi):
    """Coalesce intervals already sorted by ``lo``.

    Returns ``(merged_lo, merged_hi, first, last)`` with ``first``/``last`` the
    inclusive input positions covered by each merged interval.
    """
    k = lo.shape[0]
    if k == 0:
        e = np.empty(0, dtype=np.intp)
        return np.empty(0), np.empty(0), e, e
    reach = np.maximum.accumulate(hi)
    start = np.empty(k, dtype=bool)
    start[0] = True
    start[1:] = lo[1:] > reach[:-1]
    first = np.flatnonzero(start)
    last = np.empty_like(first)
    last[:-1] = first[1:] - 1
    last[-1] = k - 1
    return lo[first].copy(), reach[last].copy(), first, last


def _gap_groups(zq_sorted, delta):
    k = zq_sorted.shape[0]
    start = np.empty(k, dtype=bool)
    start[:1] = True
    start[1:] = np.diff(zq_sorted) > 2.0 * delta
    first = np.flatnonzero(start)
    last = np.empty_like(first)
    last[:-1] = first[1:] - 1
    last[-1:] = k - 1
    return first, last


def spcr_merge(zp, zq_sorted, delta):
    """Per-source merged axis intervals for the correspondence-free mode.

    Row ``i`` has raw intervals ``[zq_sorted[j] - zp[i] - delta, zq_sorted[j] - zp[i] + delta]``.
    Every row is the same set shifted by ``-zp[i]``, so the grouping is decided
    once, from target gaps wider than ``2 delta``. Returns flat arrays
    ``(lo, hi, owner, first, last)`` ordered by row, then by position.
    """
    rows = zp.shape[0]
    if zq_sorted.shape[0] == 0 or rows == 0:
        e = np.empty(0, dtype=np.intp)
        return np.empty(0), np.empty(0), e, e.copy(), e.copy()
    first, last = _gap_groups(zq_sorted, delta)
    lo = (zq_sorted[first][None, :] - zp[:, None]) - delta
    hi = (zq_sorted[last][None, :] - zp[:, None]) + delta
    m = first.shape[0]
    return (
        lo.reshape(-1),
        hi.reshape(-1),
        np.repeat(np.arange(rows, dtype=np.intp), m),
        np.tile(first, rows),
        np.tile(last, rows),
    )
