# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled disk-neighbourhood kernels (same contracts as ``_pykernels``).

Loops run offset-outer so the innermost index walks contiguous memory; invalid
entries are encoded as ``-inf`` instead of being tested per pair.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, pow, INFINITY

cnp.import_array()

# exp(x) is exactly 0.0 in double precision below this
cdef double UNDERFLOW = -746.0


cdef void _running_max(double[:, ::1] src, double[:, ::1] dst, Py_ssize_t w,
                       double[::1] pre, double[::1] suf) noexcept nogil:
    """Window max of width 2w+1 along axis 1 (van Herk / Gil-Werman), -inf padding."""
    cdef Py_ssize_t n0 = src.shape[0], n1 = src.shape[1]
    cdef Py_ssize_t size = 2 * w + 1
    cdef Py_ssize_t npad = n1 + 2 * w
    cdef Py_ssize_t i, j, start, stop
    cdef double a, c
    for i in range(n0):
        for j in range(w):
            pre[j] = -INFINITY
            pre[n1 + w + j] = -INFINITY
        for j in range(n1):
            pre[j + w] = src[i, j]
        # suffix maxima into suf, prefix maxima in place, block by block
        start = 0
        while start < npad:
            stop = start + size
            if stop > npad:
                stop = npad
            a = -INFINITY
            j = stop - 1
            while j >= start:
                if pre[j] > a:
                    a = pre[j]
                suf[j] = a
                j -= 1
            a = -INFINITY
            for j in range(start, stop):
                if pre[j] > a:
                    a = pre[j]
                pre[j] = a
            start = stop
        for j in range(n1):
            a = suf[j]
            if j + 2 * w < npad:
                c = pre[j + 2 * w]
                if c > a:
                    a = c
            dst[i, j] = a


def disk_max(values, valid, radius2, rows):
    v = np.ascontiguousarray(values, dtype=np.float64)
    ok = np.ascontiguousarray(valid, dtype=bool)
    cdef Py_ssize_t n0 = v.shape[0], n1 = v.shape[1]
    cdef double[:, ::1] wv = np.where(ok, v, -np.inf)
    out = np.full((n0, n1), -np.inf)
    cdef double[:, ::1] ov = out
    cdef double[:, ::1] rv = np.empty((n0, n1))
    cdef Py_ssize_t wmax = max(w for _, w in rows) if rows else 0
    cdef double[::1] pre = np.empty(n1 + 2 * wmax + 1)
    cdef double[::1] suf = np.empty(n1 + 2 * wmax + 1)
    cdef Py_ssize_t i, j, di, lo, hi, w
    by_width = {}
    for di, w in rows:
        by_width.setdefault(w, []).append(di)
    for w, dis in by_width.items():
        with nogil:
            _running_max(wv, rv, w, pre, suf)
        for di in dis:
            lo = -di if di < 0 else 0
            hi = n0 - di if di > 0 else n0
            with nogil:
                for i in range(lo, hi):
                    for j in range(n1):
                        if rv[i + di, j] > ov[i, j]:
                            ov[i, j] = rv[i + di, j]
    out[~ok] = 0.0
    return out


def disk_lr_sum(values, valid, radius2, double r, offsets):
    """Disk sums of ``|v|^r`` from per-row prefix sums, then the ``1/r`` power."""
    ok = np.ascontiguousarray(valid, dtype=bool)
    v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n0 = v.shape[0], n1 = v.shape[1]
    vr = np.where(ok, np.abs(v) if r == 1.0 else np.abs(v) ** r, 0.0)
    P = np.zeros((n0, n1 + 1))
    np.cumsum(vr, axis=1, out=P[:, 1:])
    cdef double[:, ::1] Pv = P
    cdef double[:, ::1] vv = vr
    out = np.zeros((n0, n1))
    cdef double[:, ::1] ov = out
    from ._pykernels import disk_rows
    rows = disk_rows(radius2)
    cdef Py_ssize_t i, j, di, w, lo, hi, a, b, jlo, jhi, dj
    for di, w in rows:
        lo = -di if di < 0 else 0
        hi = n0 - di if di > 0 else n0
        with nogil:
            if w <= 2:
                # short windows: summing directly matches the reference order
                for i in range(lo, hi):
                    for dj in range(-w, w + 1):
                        jlo = -dj if dj < 0 else 0
                        jhi = n1 - dj if dj > 0 else n1
                        for j in range(jlo, jhi):
                            ov[i, j] += vv[i + di, j + dj]
            else:
                for i in range(lo, hi):
                    for j in range(n1):
                        a = j - w
                        b = j + w + 1
                        if a < 0:
                            a = 0
                        if b > n1:
                            b = n1
                        ov[i, j] += Pv[i + di, b] - Pv[i + di, a]
    if r != 1.0:
        np.power(out, 1.0 / r, out=out)
    out[~ok] = 0.0
    return out


def disk_lse(values, valid, radius2, double eps, offsets, maxima):
    ok = np.ascontiguousarray(valid, dtype=bool)
    cdef double[:, ::1] vv = np.where(ok, np.ascontiguousarray(values, dtype=np.float64), -np.inf)
    m = np.ascontiguousarray(maxima, dtype=np.float64)
    cdef double[:, ::1] mv = m
    cdef Py_ssize_t n0 = vv.shape[0], n1 = vv.shape[1]
    cdef cnp.int64_t[:, ::1] offv = np.ascontiguousarray(offsets, dtype=np.int64)
    acc = np.zeros((n0, n1))
    cdef double[:, ::1] av = acc
    cdef Py_ssize_t i, j, t, di, dj, lo, hi, jlo, jhi, nt = offv.shape[0]
    cdef double x, inv = 1.0 / eps
    with nogil:
        for t in range(nt):
            di = offv[t, 0]
            dj = offv[t, 1]
            lo = -di if di < 0 else 0
            hi = n0 - di if di > 0 else n0
            jlo = -dj if dj < 0 else 0
            jhi = n1 - dj if dj > 0 else n1
            for i in range(lo, hi):
                for j in range(jlo, jhi):
                    x = (vv[i + di, j + dj] - mv[i, j]) / eps
                    if x > UNDERFLOW:
                        av[i, j] += exp(x)
    out = np.zeros((n0, n1))
    out[ok] = m[ok] + eps * np.log(acc[ok])
    return out


def disk_lse_adjoint(values, valid, radius2, double eps, lse, gbar, offsets):
    ok = np.ascontiguousarray(valid, dtype=bool)
    cdef double[:, ::1] vv = np.where(ok, np.ascontiguousarray(values, dtype=np.float64), -np.inf)
    # an invalid centre contributes nothing: give it an infinite soft maximum
    cdef double[:, ::1] Lv = np.where(ok, np.ascontiguousarray(lse, dtype=np.float64), np.inf)
    cdef double[:, ::1] gbv = np.ascontiguousarray(gbar, dtype=np.float64)
    cdef Py_ssize_t n0 = vv.shape[0], n1 = vv.shape[1]
    cdef cnp.int64_t[:, ::1] offv = np.ascontiguousarray(offsets, dtype=np.int64)
    g = np.zeros((n0, n1))
    cdef double[:, ::1] gv = g
    cdef Py_ssize_t i, j, t, di, dj, lo, hi, jlo, jhi, nt = offv.shape[0]
    cdef double x
    with nogil:
        for t in range(nt):
            di = offv[t, 0]
            dj = offv[t, 1]
            lo = -di if di < 0 else 0
            hi = n0 - di if di > 0 else n0
            jlo = -dj if dj < 0 else 0
            jhi = n1 - dj if dj > 0 else n1
            for i in range(lo, hi):
                for j in range(jlo, jhi):
                    x = (vv[i + di, j + dj] - Lv[i, j]) / eps
                    if x > UNDERFLOW:
                        gv[i + di, j + dj] += gbv[i, j] * exp(x)
    return g
