import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from twoscale import kernels
from twoscale._pykernels import disk_offsets, disk_rows

BACKENDS = kernels.available_backends()


@pytest.fixture(params=BACKENDS, scope="module")
def backend(request):
    old = kernels.get_backend()
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(old)


grids = st.tuples(st.integers(1, 14), st.integers(1, 14)).flatmap(
    lambda s: st.tuples(
        arrays(np.float64, s, elements=st.floats(-3, 3, allow_nan=False)),
        arrays(np.bool_, s),
    )
)
radii = st.sampled_from([0.5, 1.0, 2.0, 2.0 * (1 + 1e-12), 4.5, 8.0 * (1 + 1e-12), 12.0])


def test_disk_rows_cover_exactly_the_disk():
    for r2 in (0.0, 1.0, 2.0, 5.0, 8.0 * (1 + 1e-12), 31.9):
        offs = set(disk_offsets(r2))
        R = int(math.isqrt(int(r2))) + 1
        brute = {(a, b) for a in range(-R, R + 1) for b in range(-R, R + 1) if a * a + b * b <= r2}
        assert offs == brute
        assert all(w >= 0 for _, w in disk_rows(r2))


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


@given(grids, radii)
def test_disk_max_matches_naive(backend, g, r2):
    v, ok = g
    np.testing.assert_array_equal(kernels.disk_max(v, ok, r2), kernels.disk_max_naive(v, ok, r2))


@given(grids, radii, st.sampled_from([1.0, 2.0, 0.5]))
def test_lr_sum_matches_direct_sum(backend, g, r2, r):
    v, ok = g
    out = kernels.disk_lr_sum(v, ok, r2, r)
    n0, n1 = v.shape
    ref = np.zeros_like(v)
    for i in range(n0):
        for j in range(n1):
            if ok[i, j]:
                s = sum(abs(v[i + a, j + b]) ** r for a, b in disk_offsets(r2)
                        if 0 <= i + a < n0 and 0 <= j + b < n1 and ok[i + a, j + b])
                ref[i, j] = s ** (1 / r)
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)


@given(grids, radii, st.sampled_from([1.0, 0.1, 1e-3]))
def test_lse_brackets_the_max(backend, g, r2, eps):
    v, ok = g
    m = kernels.disk_max(v, ok, r2)
    s = kernels.disk_lse(v, ok, r2, eps)
    count = len(disk_offsets(r2))
    assert np.all(s[ok] >= m[ok] - 1e-12)
    assert np.all(s[ok] <= m[ok] + eps * math.log(count) + 1e-12)
    assert np.all(s[~ok] == 0)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
@given(grids, radii, st.sampled_from([1.0, 0.05, 1e-3]))
def test_backends_agree(g, r2, eps):
    v, ok = g
    rng = np.random.default_rng(0)
    gbar = rng.random(v.shape)
    out = {}
    for b in BACKENDS:
        kernels.set_backend(b)
        lse = kernels.disk_lse(v, ok, r2, eps)
        out[b] = (kernels.disk_max(v, ok, r2), kernels.disk_lr_sum(v, ok, r2, 1.0), lse,
                  kernels.disk_lse_adjoint(v, ok, r2, eps, lse, gbar))
    kernels.set_backend(BACKENDS[-1])
    for a, c in zip(out["python"], out["cython"]):
        np.testing.assert_allclose(a, c, rtol=1e-12, atol=1e-12)


def test_lse_adjoint_is_the_gradient(backend):
    rng = np.random.default_rng(7)
    v = rng.normal(size=(9, 7))
    ok = rng.random(v.shape) > 0.2
    r2, eps = 4.5, 0.3
    gbar = rng.random(v.shape) * ok
    lse = kernels.disk_lse(v, ok, r2, eps)
    g = kernels.disk_lse_adjoint(v, ok, r2, eps, lse, gbar)
    num = np.zeros_like(v)
    d = 1e-6
    for idx in np.ndindex(v.shape):
        vp, vm = v.copy(), v.copy()
        vp[idx] += d
        vm[idx] -= d
        num[idx] = (np.sum(gbar * kernels.disk_lse(vp, ok, r2, eps))
                    - np.sum(gbar * kernels.disk_lse(vm, ok, r2, eps))) / (2 * d)
    np.testing.assert_allclose(g, num, atol=1e-7)


def test_env_var_forces_fallback(tmp_path):
    import subprocess
    import sys

    code = "from twoscale import kernels; print(kernels.get_backend())"
    env = {"TWOSCALE_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
