import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twoscale.energy import (
    OperatorError,
    OperatorSpec,
    adjoint_operator,
    apply_operator,
    consistency_residual,
    fidelity_energy,
    kernel_symbol,
    poly_bump,
    reports_to_csv,
    split_near_off,
    total_energy,
)
from twoscale.scene import disk_scene, empty_image, sample, sinusoid_scene
from twoscale.transform import ModelParams, two_scale

UNIT = ((0.0, 1.0), (0.0, 1.0))


def test_operator_validation():
    with pytest.raises(OperatorError):
        OperatorSpec("sharpen")
    with pytest.raises(OperatorError):
        OperatorSpec("convolution")
    with pytest.raises(OperatorError):
        OperatorSpec("convolution", taps=((1.0,),), radius=0.1)
    with pytest.raises(OperatorError):
        OperatorSpec("mask")
    with pytest.raises(OperatorError):
        OperatorSpec("convolution", taps=((0.5, 0.5),)).kernel(4)


@pytest.mark.parametrize("spec", [OperatorSpec.identity(), OperatorSpec.box_blur(3), OperatorSpec.bump(0.1),
                                  OperatorSpec.box_mask((0, 0.5), (0, 1))])
def test_operator_spec_roundtrip(spec):
    assert OperatorSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_poly_bump_has_unit_mass():
    r = np.linspace(0, 0.2, 20001)
    mass = np.trapezoid(2 * math.pi * r * poly_bump(r, 0 * r, 0.2), r)
    assert mass == pytest.approx(1.0, rel=1e-6)
    assert kernel_symbol(0.2, 0.0) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("n", [4, 6, 8])
def test_bump_kernel_is_normalised_and_symmetric(n):
    k = OperatorSpec.bump(0.1).kernel(n)
    assert k.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(k, k[::-1, ::-1])
    np.testing.assert_allclose(k, k.T)


def test_convolution_preserves_constants_in_the_interior(haar):
    img = empty_image(UNIT, haar, 5)
    img.values[:] = 3.0
    out = apply_operator(OperatorSpec.bump(0.1), img, haar)
    assert out.mask.sum() < img.mask.sum()
    np.testing.assert_allclose(out.values[out.mask], 3.0)


@given(st.integers(0, 2**31 - 1), st.sampled_from([OperatorSpec.box_blur(3), OperatorSpec.bump(0.15)]))
def test_convolution_adjoint_identity(seed, spec):
    from twoscale.frames import frame_system

    haar = frame_system("haar", 8)
    rng = np.random.default_rng(seed)
    img = empty_image(UNIT, haar, 4)
    img.values = np.where(img.mask, rng.normal(size=img.shape), 0.0)
    Au = apply_operator(spec, img, haar)
    v = np.where(Au.mask, rng.normal(size=img.shape), 0.0)
    lhs = np.sum(Au.values * v)
    rhs = np.sum(img.values * adjoint_operator(spec, v, img))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_mask_marks_observed_pixels(haar):
    img = sample(disk_scene(), haar, 5)
    out = apply_operator(OperatorSpec.box_mask((0, 0.5), (0, 1)), img, haar)
    c = img.points() + img.h / 2  # Haar pixel centres
    np.testing.assert_array_equal(out.observed, (c[..., 0] <= 0.5) & (c[..., 1] <= 1.0))
    with pytest.raises(OperatorError):
        apply_operator(OperatorSpec.box_mask((0, 0.5), (0, 1)), img)


def test_fidelity(haar, rng):
    data = sample(disk_scene(), haar, 5)
    assert fidelity_energy(data, OperatorSpec.identity(), data) == 0.0
    noisy = data.copy(data.values + np.where(data.mask, rng.normal(size=data.shape) * 0.1, 0))
    expect = data.h**2 * np.sum((noisy.values - data.values)[data.mask] ** 2)
    assert fidelity_energy(noisy, OperatorSpec.identity(), data) == pytest.approx(expect)
    with pytest.raises(OperatorError):
        fidelity_energy(sample(sinusoid_scene(), haar, 4), OperatorSpec.identity(), data)


def test_consistency_residuals(haar):
    sc = sinusoid_scene()
    assert consistency_residual(OperatorSpec.identity(), sc, haar, 5) == 0.0
    aligned = OperatorSpec.box_mask((0, 0.5), (0, 1))
    assert consistency_residual(aligned, disk_scene(), haar, 5) == 0.0
    res = [consistency_residual(OperatorSpec.bump(0.1), sc, haar, n) for n in (4, 5, 6)]
    assert res[0] == pytest.approx(6.17e-3, rel=0.02)
    assert res[0] > res[1] > res[2]


def test_total_energy_report(haar):
    sc = disk_scene()
    img = sample(sc, haar, 6)
    rep = total_energy(img, haar, ModelParams(), OperatorSpec.identity(), img, sc)
    assert rep.F == 0.0
    assert rep.E == rep.R
    assert rep.near + rep.off == pytest.approx(rep.R, rel=1e-14)
    assert rep.R_ref == pytest.approx(math.pi / 2)
    back = json.loads(rep.to_json())
    assert back["level"] == 6
    rows = list(csv.DictReader(io.StringIO(reports_to_csv([rep, rep]))))
    assert len(rows) == 2 and float(rows[0]["R_n"]) == rep.R


def test_split_without_curves_is_all_off(haar):
    img = sample(sinusoid_scene(), haar, 5)
    fld = two_scale(img, haar)
    near, off = split_near_off(fld, (), haar)
    assert near == 0.0 and off > 0
