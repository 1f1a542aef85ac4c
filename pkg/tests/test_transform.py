import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from twoscale.energy import regularity_energy
from twoscale.frames import frame_system
from twoscale.scene import disk_scene, empty_image, make_scene, sample
from twoscale.transform import (
    CoefficientGrid,
    ModelParams,
    analyze,
    channel_aggregate,
    correlate,
    correlate_adjoint,
    default_weights,
    neighborhood_aggregate,
    level_scales,
    truncate,
    two_scale,
)


def _affine(b1, b2):
    return make_scene(smooth_spec={"kind": "affine", "a": 0.7, "b1": b1, "b2": b2})


@pytest.mark.parametrize("name", ["haar", "linear"])
@pytest.mark.parametrize("n", [4, 6])
def test_first_order_channels_sample_the_gradient(name, n):
    system = frame_system(name, 8)
    stack = analyze(sample(_affine(1.5, -0.25), system, n), system)
    m = stack.mask
    assert m.any()
    np.testing.assert_allclose(stack.channels[(1, 0)][m], 1.5, atol=1e-6)
    np.testing.assert_allclose(stack.channels[(0, 1)][m], -0.25, atol=1e-6)


def test_weights_follow_the_channel_integrals(haar):
    w = default_weights(haar, 6)
    assert w[(1, 0)] == pytest.approx(-(2.0**4) / 0.25)


def test_model_params_defaults_and_roundtrip():
    p = ModelParams(alpha=2.0)
    assert p.scale(6) == pytest.approx(1 / 8)
    assert p.clamp(6) == pytest.approx(8.0)
    assert level_scales(6, 2.0) == (p.scale(6), p.clamp(6))
    q = ModelParams(alpha=0.5, r=1.0, q=math.inf, weights={(1, 0): 1.0, (0, 1): 2.0})
    assert ModelParams.from_dict(q.to_dict()) == q


shapes = st.tuples(st.integers(3, 10), st.integers(3, 10))


@given(shapes.flatmap(lambda s: st.tuples(arrays(np.float64, s, elements=st.floats(-5, 5)),
                                          arrays(np.float64, s, elements=st.floats(-5, 5)))),
       st.sampled_from(["haar", "linear"]))
def test_correlate_adjoint_identity(pair, name):
    u, g = pair
    system = frame_system(name, 8)
    for f in system.bank.filters:
        lhs = np.sum(correlate(u, f) * g)
        rhs = np.sum(u * correlate_adjoint(g, f))
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-9)


def _grid(values, mask, level=6):
    return CoefficientGrid(level, np.where(mask, values, 0.0), mask, (0, 0), (0, 0))


field_inputs = st.tuples(st.integers(4, 12), st.integers(4, 12)).flatmap(
    lambda s: st.tuples(arrays(np.float64, s, elements=st.floats(0, 10)), arrays(np.bool_, s)))


@given(field_inputs, st.floats(0.01, 0.4), st.sampled_from([math.inf, 1.0, 2.0]))
def test_neighbourhood_aggregation_is_extensive_and_monotone(inp, H, r):
    v, m = inp
    g = _grid(v, m)
    out = neighborhood_aggregate(g, H, r).values
    assert np.all(out[m] >= g.values[m] - 1e-12)
    bigger = neighborhood_aggregate(_grid(v + 1.0, m), H, r).values
    assert np.all(bigger[m] >= out[m] - 1e-12)
    assert np.all(out[~m] == 0)


@given(field_inputs, st.floats(0.01, 0.4), st.floats(0.1, 8))
def test_clamp_commutes_with_the_max(inp, H, M):
    v, m = inp
    a = truncate(neighborhood_aggregate(_grid(v, m), H), M).values
    b = neighborhood_aggregate(_grid(np.minimum(v, M), m), H).values
    np.testing.assert_allclose(a, b)


@given(st.floats(0.1, 10))
def test_unclamped_field_is_positively_homogeneous(a):
    system = frame_system("haar", 8)
    img = sample(disk_scene(), system, 5)
    loose = ModelParams(M=1e12)
    f1 = two_scale(img, system, loose).values
    f2 = two_scale(img.copy(a * img.values + 3.0), system, loose).values
    np.testing.assert_allclose(f2, a * f1, rtol=1e-10, atol=1e-9)


def test_channel_norms():
    system = frame_system("haar", 8)
    stack = analyze(sample(_affine(3.0, 4.0), system, 4), system)
    m = stack.mask
    np.testing.assert_allclose(channel_aggregate(stack, 2).values[m], 5.0, atol=1e-9)
    np.testing.assert_allclose(channel_aggregate(stack, 1).values[m], 7.0, atol=1e-9)
    np.testing.assert_allclose(channel_aggregate(stack, math.inf).values[m], 4.0, atol=1e-9)


def test_coefficients_never_read_outside_the_lattice(linear):
    img = empty_image(((0.0, 1.0), (0.0, 1.0)), linear, 4)
    img.values[:] = 1e6  # garbage outside the interior must not leak
    img.values[img.mask] = 0.0
    stack = analyze(img, linear)
    for c in stack.channels.values():
        assert np.all(c == 0)


def test_disk_energy_at_level_five(haar):
    fld = two_scale(sample(disk_scene(), haar, 5), haar, ModelParams())
    assert regularity_energy(fld) == pytest.approx(1.7521, abs=1e-4)
    assert fld.values.max() <= fld.M


def test_rejects_bad_scales():
    g = _grid(np.ones((4, 4)), np.ones((4, 4), bool))
    with pytest.raises(ValueError):
        neighborhood_aggregate(g, 0.0)
    with pytest.raises(ValueError):
        truncate(g, -1.0)
