"""Backend selection for the disk-neighbourhood kernels.

The compiled ``_ckernels`` extension is used when importable; otherwise the
numpy versions in ``_pykernels`` are used.  Set ``TWOSCALE_PURE_PYTHON=1`` to
force the fallback, or call :func:`set_backend` at runtime.
"""

import os

import numpy as np

from . import _pykernels

try:  # pragma: no cover - depends on the build
    from . import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None

_backend = "cython" if _ckernels is not None and not os.environ.get("TWOSCALE_PURE_PYTHON") else "python"


def available_backends():
    return ("python", "cython") if _ckernels is not None else ("python",)


def get_backend():
    return _backend


def set_backend(name):
    global _backend
    if name not in available_backends():
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    _backend = name


def _offsets_array(radius2):
    return np.asarray(_pykernels.disk_offsets(radius2), dtype=np.int64).reshape(-1, 2)


def disk_max(values, valid, radius2):
    if _backend == "cython":
        return _ckernels.disk_max(values, valid, radius2, _pykernels.disk_rows(radius2))
    return _pykernels.disk_max(values, valid, radius2)


def disk_lr_sum(values, valid, radius2, r):
    if _backend == "cython":
        return _ckernels.disk_lr_sum(values, valid, radius2, float(r), _offsets_array(radius2))
    return _pykernels.disk_lr_sum(values, valid, radius2, r)


def disk_lse(values, valid, radius2, eps):
    if _backend == "cython":
        m = disk_max(values, valid, radius2)
        return _ckernels.disk_lse(values, valid, radius2, float(eps), _offsets_array(radius2), m)
    return _pykernels.disk_lse(values, valid, radius2, eps)


def disk_lse_adjoint(values, valid, radius2, eps, lse, gbar):
    if _backend == "cython":
        return _ckernels.disk_lse_adjoint(
            values, valid, radius2, float(eps), lse, gbar, _offsets_array(radius2)
        )
    return _pykernels.disk_lse_adjoint(values, valid, radius2, eps, lse, gbar)


def disk_max_naive(values, valid, radius2):
    """Direct definition of the masked disk maximum; used as a test oracle."""
    n0, n1 = values.shape
    out = np.zeros(values.shape)
    offs = _pykernels.disk_offsets(radius2)
    for i in range(n0):
        for j in range(n1):
            if not valid[i, j]:
                continue
            best = -np.inf
            for di, dj in offs:
                a, b = i + di, j + dj
                if 0 <= a < n0 and 0 <= b < n1 and valid[a, b] and values[a, b] > best:
                    best = values[a, b]
            out[i, j] = best
    return out
