# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: branch bounds for the pole search and per-point interval merging."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sin

cnp.import_array()

cdef double HALF_PI = 1.5707963267948966


def bound_counts(const double[:, ::1] n, const double[::1] norms, const double[::1] xi,
                 const unsigned char[::1] degenerate, const cnp.intp_t[::1] idx,
                 h, double spread, double tau):
    cdef Py_ssize_t k = idx.shape[0]
    cdef Py_ssize_t t, i
    cdef Py_ssize_t upper = 0, lower = 0
    cdef double hx = h[0], hy = h[1], hz = h[2]
    cdef double r, ang, psi
    out = np.empty(k, dtype=np.intp)
    cdef cnp.intp_t[::1] cand = out
    with nogil:
        for t in range(k):
            i = idx[t]
            if degenerate[i]:
                cand[upper] = i
                upper += 1
                lower += 1
                continue
            r = fabs(n[i, 0] * hx + n[i, 1] * hy + n[i, 2] * hz)
            ang = spread + xi[i]
            if ang >= HALF_PI:
                psi = norms[i]
            else:
                psi = norms[i] * sin(ang)
            if psi < tau:
                psi = tau
            if r <= psi:
                cand[upper] = i
                upper += 1
                if r <= tau:
                    lower += 1
    return upper, lower, out[:upper]


cdef Py_ssize_t _merge_row(const double[::1] lo, const double[::1] hi, double shift,
                           double[::1] out_lo, double[::1] out_hi,
                           cnp.intp_t[::1] first, cnp.intp_t[::1] last,
                           Py_ssize_t pos) noexcept nogil:
    # intervals are [lo[j] + shift, hi[j] + shift], sorted by lo
    cdef Py_ssize_t k = lo.shape[0]
    cdef Py_ssize_t j
    cdef double a, b, reach
    if k == 0:
        return pos
    reach = hi[0] + shift
    out_lo[pos] = lo[0] + shift
    first[pos] = 0
    for j in range(1, k):
        a = lo[j] + shift
        b = hi[j] + shift
        if a > reach:
            out_hi[pos] = reach
            last[pos] = j - 1
            pos += 1
            out_lo[pos] = a
            first[pos] = j
            reach = b
        elif b > reach:
            reach = b
    out_hi[pos] = reach
    last[pos] = k - 1
    return pos + 1


def merge_sorted(const double[::1] lo, const double[::1] hi):
    cdef Py_ssize_t k = lo.shape[0]
    mlo = np.empty(k)
    mhi = np.empty(k)
    first = np.empty(k, dtype=np.intp)
    last = np.empty(k, dtype=np.intp)
    cdef double[::1] vlo = mlo
    cdef double[::1] vhi = mhi
    cdef cnp.intp_t[::1] vfirst = first
    cdef cnp.intp_t[::1] vlast = last
    cdef Py_ssize_t m
    with nogil:
        m = _merge_row(lo, hi, 0.0, vlo, vhi, vfirst, vlast, 0)
    return mlo[:m], mhi[:m], first[:m], last[:m]


def spcr_merge(const double[::1] zp, const double[::1] zq_sorted, double delta):
    cdef Py_ssize_t rows = zp.shape[0]
    cdef Py_ssize_t k = zq_sorted.shape[0]
    cdef Py_ssize_t i, j, g, m = 0, pos
    if rows == 0 or k == 0:
        e = np.empty(0, dtype=np.intp)
        return np.empty(0), np.empty(0), e, e.copy(), e.copy()
    # every row is the same interval set shifted by -zp[i]: group once
    gfirst_arr = np.empty(k, dtype=np.intp)
    glast_arr = np.empty(k, dtype=np.intp)
    cdef cnp.intp_t[::1] gfirst = gfirst_arr
    cdef cnp.intp_t[::1] glast = glast_arr
    with nogil:
        gfirst[0] = 0
        for j in range(1, k):
            if zq_sorted[j] - zq_sorted[j - 1] > 2.0 * delta:
                glast[m] = j - 1
                m += 1
                gfirst[m] = j
        glast[m] = k - 1
        m += 1
    out_lo = np.empty(rows * m)
    out_hi = np.empty(rows * m)
    owner = np.empty(rows * m, dtype=np.intp)
    first = np.empty(rows * m, dtype=np.intp)
    last = np.empty(rows * m, dtype=np.intp)
    cdef double[::1] olo = out_lo
    cdef double[::1] ohi = out_hi
    cdef cnp.intp_t[::1] own = owner
    cdef cnp.intp_t[::1] ofirst = first
    cdef cnp.intp_t[::1] olast = last
    with nogil:
        for i in range(rows):
            for g in range(m):
                pos = i * m + g
                olo[pos] = (zq_sorted[gfirst[g]] - zp[i]) - delta
                ohi[pos] = (zq_sorted[glast[g]] - zp[i]) + delta
                own[pos] = i
                ofirst[pos] = gfirst[g]
                olast[pos] = glast[g]
    return out_lo, out_hi, owner, first, last
