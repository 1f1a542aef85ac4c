"""Pure numpy implementations of the disk-neighbourhood kernels.

Every function takes a 2-D float array ``values`` and a boolean ``valid`` mask of
the same shape.  The neighbourhood of ``k`` is every valid ``l`` with
``|l - k|^2 <= radius2`` (lattice units).  Outputs are zero where ``valid`` is
False.  These are the reference implementations; the compiled kernels in
``_ckernels`` must agree with them.
"""

import math

import numpy as np
from scipy.ndimage import maximum_filter1d


def disk_rows(radius2):
    """Row offsets ``di`` and the half-width ``w(di)`` of the disk at that row."""
    R = int(math.floor(math.sqrt(radius2)))
    while (R + 1) ** 2 <= radius2:
        R += 1
    rows = []
    for di in range(-R, R + 1):
        rem = radius2 - di * di
        w = int(math.floor(math.sqrt(rem)))
        while (w + 1) ** 2 <= rem:
            w += 1
        while w > 0 and w * w > rem:
            w -= 1
        rows.append((di, w))
    return rows


def disk_offsets(radius2):
    """All lattice offsets ``(di, dj)`` inside the disk, in a fixed order."""
    return [(di, dj) for di, w in disk_rows(radius2) for dj in range(-w, w + 1)]


def _shift_slices(shape, di, dj):
    """Slices (dst, src) so that ``dst`` index k pairs with ``src`` index k + (di, dj).

    Shifts longer than the axis give empty slices (never negative bounds).
    """

    def axis(n, d):
        lo, hi = max(0, -d), min(n, n - d)
        hi = max(hi, lo)
        return slice(lo, hi), slice(lo + d, hi + d)

    d0, s0 = axis(shape[0], di)
    d1, s1 = axis(shape[1], dj)
    return (d0, d1), (s0, s1)


def disk_max(values, valid, radius2):
    work = np.where(valid, values, -np.inf)
    out = np.full(values.shape, -np.inf)
    rows = disk_rows(radius2)
    by_width = {}
    for di, w in rows:
        by_width.setdefault(w, []).append(di)
    for w, dis in by_width.items():
        run = maximum_filter1d(work, size=2 * w + 1, axis=1, mode="constant", cval=-np.inf)
        for di in dis:
            dst, src = _shift_slices(values.shape, di, 0)
            np.maximum(out[dst], run[src], out=out[dst])
    out[~valid] = 0.0
    return out


def disk_lr_sum(values, valid, radius2, r):
    vr = np.where(valid, np.abs(values) ** r, 0.0)
    acc = np.zeros(values.shape)
    for di, dj in disk_offsets(radius2):
        dst, src = _shift_slices(values.shape, di, dj)
        acc[dst] += vr[src]
    out = acc ** (1.0 / r)
    out[~valid] = 0.0
    return out


def disk_lse(values, valid, radius2, eps):
    """Soft maximum ``eps * log sum exp(v_l / eps)`` over each disk."""
    m = disk_max(values, valid, radius2)
    work = np.where(valid, values, -np.inf)
    centre = np.where(valid, m, np.inf)
    acc = np.zeros(values.shape)
    for di, dj in disk_offsets(radius2):
        dst, src = _shift_slices(values.shape, di, dj)
        acc[dst] += np.exp((work[src] - centre[dst]) / eps)
    out = np.zeros(values.shape)
    out[valid] = m[valid] + eps * np.log(acc[valid])
    return out


def disk_lse_adjoint(values, valid, radius2, eps, lse, gbar):
    """Pull back ``gbar`` (cotangent of the soft maximum) onto ``values``."""
    g = np.zeros(values.shape)
    work = np.where(valid, values, -np.inf)
    # an invalid centre has an infinite soft maximum and so contributes nothing
    L = np.where(valid, lse, np.inf)
    for di, dj in disk_offsets(radius2):
        dst, src = _shift_slices(values.shape, di, dj)
        g[src] += gbar[dst] * np.exp((work[src] - L[dst]) / eps)
    return g
