import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twoscale.frames import (
    Filter,
    FilterBank,
    FrameError,
    antiderivative_line_integral,
    build_frame_system,
    cascade,
    halfplane_integrals,
    haar_bank,
    linear_spline_bank,
    load_frame_system,
    named_bank,
    robust_support_delta,
    save_frame_system,
    tensor_product,
    vanishing_order_1d,
    verify_uep,
)

S = 1 / (2 * math.sqrt(2))


@pytest.mark.parametrize("name", ["haar", "linear"])
@pytest.mark.parametrize("tensor", [False, True])
def test_shipped_banks_satisfy_uep(name, tensor):
    rep = verify_uep(named_bank(name, tensor=tensor))
    assert rep.passed(1e-12)
    assert rep.n_freq == 256


def test_uep_detects_a_broken_bank():
    b = linear_spline_bank()
    zeroed = Filter(np.zeros(3), b.filters[1].offset, b.filters[1].label)
    broken = FilterBank((b.filters[0], zeroed, b.filters[2]), 1)
    rep = verify_uep(broken)
    # the missing |h1^(xi)|^2 = sin(xi)^2 / 2 peaks at xi = pi/2, which is on the grid
    assert rep.partition_residual >= 0.5 - 1e-12
    assert not rep.passed()


def test_lowpass_must_sum_to_one():
    with pytest.raises(FrameError):
        FilterBank((Filter(np.array([0.5, 0.6]), (0,), (0,)),), 1)


def test_bank_taps():
    np.testing.assert_allclose(haar_bank().filters[1].taps, [0.5, -0.5])
    lin = linear_spline_bank()
    np.testing.assert_allclose(lin.filters[0].taps, [0.25, 0.5, 0.25])
    np.testing.assert_allclose(lin.filters[1].taps, [S, 0, -S])
    assert lin.filters[0].offset == (-1,)


def test_vanishing_orders():
    lin = linear_spline_bank()
    assert vanishing_order_1d(lin.filters[1]) == 1
    assert vanishing_order_1d(lin.filters[2]) == 2
    assert vanishing_order_1d(haar_bank().filters[1]) == 1


def test_tensor_product_layout():
    t = tensor_product(linear_spline_bank())
    assert len(t.filters) == 9
    assert t.labels[0] == (0, 0)
    assert [t.filters[i].label for i in t.first_order] == [(1, 0), (0, 1)]
    assert t.lowpass.taps.sum() == pytest.approx(1.0)


def test_cascade_reproduces_the_hat_function():
    c = cascade(linear_spline_bank(), depth=8)
    x = c.coords(0) + c.spacing / 2
    hat = np.clip(1 - np.abs(x), 0, None)
    assert np.max(np.abs(c.phi - hat)) <= 2.0**-7
    assert c.converged
    assert c.phi.sum() * c.spacing == pytest.approx(1.0)


def test_haar_cascade_is_the_indicator():
    c = cascade(haar_bank(), depth=6)
    x = c.coords(0)
    np.testing.assert_array_equal(c.phi, ((x >= 0) & (x < 1)).astype(float))


def test_refinement_consistency():
    """Cascades one level apart agree at the coarse cell centres up to the cascade error."""
    b = linear_spline_bank()
    c6, c7 = cascade(b, 6), cascade(b, 7)
    for j in range(3):
        coarse = c6.psi[j]
        x = c6.coords(0) + c6.spacing / 2
        fine = np.interp(x, c7.coords(0) + c7.spacing / 2, c7.psi[j])
        assert np.max(np.abs(coarse - fine)) <= 4 * 2.0**-6


def test_channel_integrals(haar, linear):
    assert haar.channel_integrals[(1, 0)] == pytest.approx(0.25, abs=1e-12)
    assert haar.channel_integrals[(0, 1)] == pytest.approx(0.25, abs=1e-12)
    for label, val in linear.closed_form_integrals.items():
        assert linear.channel_integrals[label] == pytest.approx(val, abs=1e-7)
    assert linear.channel_integrals[(1, 0)] == pytest.approx(1 / (2 * math.sqrt(2)), abs=1e-7)


def test_moment_tags_match_labels(haar, linear):
    for system in (haar, linear):
        for label, tag in system.moment_tags.items():
            assert tuple(tag) == tuple(label)


def test_sign_check_rejects_oscillating_channel():
    b = tensor_product(linear_spline_bank())
    # point the first-order slot at the second-order channel (2, 0): its
    # anti-derivative changes sign
    idx = b.labels.index((2, 0))
    bad = FilterBank(b.filters, 2, first_order=(idx, b.first_order[1]))
    with pytest.raises(FrameError):
        build_frame_system(bad, depth=6)


def test_line_integral_route_matches_halfplane_integrals(linear):
    nu = (math.cos(0.7), math.sin(0.7))
    a = np.array([[0.3, -0.4]])
    I = halfplane_integrals(linear, nu, a)[0]
    for k, label in enumerate(linear.first_order_labels):
        assert antiderivative_line_integral(linear, label, nu, a[0]) == pytest.approx(I[k], abs=1e-6)


@pytest.mark.parametrize("nu", [(1.0, 0.0), (0.0, 1.0), (math.sqrt(0.5), math.sqrt(0.5))])
def test_halfplane_integral_vanishes_far_from_the_edge(haar, linear, nu):
    """Support entirely on one side: either nothing is cut or the whole zero-mean psi is."""
    far = 5 * np.array([[nu[0], nu[1]], [-nu[0], -nu[1]]])
    for system in (haar, linear):
        np.testing.assert_allclose(halfplane_integrals(system, nu, far), 0, atol=1e-12)


def test_delta_is_zero_on_the_default_box(haar, linear):
    for system in (haar, linear):
        assert robust_support_delta(system, angle_steps=16, shift_steps=8).value == pytest.approx(0, abs=1e-12)


def test_delta_positive_on_a_tight_box(linear):
    est = robust_support_delta(linear, angle_steps=16, shift_steps=8, box=(-0.75, 0.75))
    assert est.value > 0.005


@given(st.sampled_from([(-0.75, 0.75), (-0.5, 0.5), (-1.25, 0.25)]), st.sampled_from([8, 16]))
def test_delta_monotone_under_refinement(box, steps):
    from twoscale.frames import frame_system

    system = frame_system("linear", 8)
    coarse = robust_support_delta(system, angle_steps=8, shift_steps=steps, box=box).value
    fine = robust_support_delta(system, angle_steps=16, shift_steps=2 * steps, box=box).value
    assert fine <= coarse + 1e-15


def test_frms_roundtrip(tmp_path, linear):
    p = tmp_path / "lin.frms"
    save_frame_system(linear, p)
    back = load_frame_system(p)
    assert back.bank.labels == linear.bank.labels
    np.testing.assert_array_equal(back.samples.phi, linear.samples.phi)
    for a, b in zip(back.samples.psi, linear.samples.psi):
        np.testing.assert_array_equal(a, b)
    assert back.channel_integrals == linear.channel_integrals
    assert back.support_radius == linear.support_radius
    for k in linear.antiderivatives:
        np.testing.assert_array_equal(back.antiderivatives[k], linear.antiderivatives[k])


def test_frms_rejects_garbage(tmp_path):
    p = tmp_path / "bad.frms"
    p.write_bytes(b"NOPE" + b"\0" * 32)
    with pytest.raises(FrameError):
        load_frame_system(p)
