import math

import numpy as np
import pytest

from twoscale.energy import OperatorSpec
from twoscale.frames import frame_system
from twoscale.scene import empty_image
from twoscale.solver import (
    EnergyModel,
    SolverError,
    SolverParams,
    brute_force_min,
    initial_guess,
    restore,
)
from twoscale.transform import ModelParams

UNIT = ((0.0, 1.0), (0.0, 1.0))
TINY = ((0.0, 0.75), (0.0, 0.75))  # 3 x 3 interior pixels at n = 2 (Haar)
LEVELS = np.linspace(0.0, 1.0, 5)


def _random_image(system, n, rng, domain=UNIT):
    img = empty_image(domain, system, n)
    img.values = np.where(img.mask, rng.random(img.shape), 0.0)
    return img


def _numeric_grad(em, u, eps, idx, d=1e-6):
    up, um = u.copy(), u.copy()
    up[idx] += d
    um[idx] -= d
    return (em.smooth(up, eps)[0] - em.smooth(um, eps)[0]) / (2 * d)


@pytest.mark.parametrize("model, spec", [
    (ModelParams(), OperatorSpec.identity()),
    (ModelParams(q=1.0), OperatorSpec.box_blur(3)),
    (ModelParams(p=2.0), OperatorSpec.box_mask((0.0, 0.6), (0.0, 1.0))),
    (ModelParams(r=1.0, alpha=0.5), OperatorSpec.identity()),
])
@pytest.mark.parametrize("system_name", ["haar", "linear"])
def test_surrogate_gradient_matches_finite_differences(model, spec, system_name):
    system = frame_system(system_name, 8)
    rng = np.random.default_rng(11)
    data = _random_image(system, 3, rng)  # 8 x 8 interior-ish lattice
    em = EnergyModel(data, spec, system, model)
    u = np.where(data.mask, rng.random(data.shape), 0.0)
    eps = 0.1
    _, g = em.smooth(u, eps)
    free = np.argwhere(data.mask)
    for idx in map(tuple, free[rng.choice(len(free), 10, replace=False)]):
        num = _numeric_grad(em, u, eps, idx)
        assert g[idx] == pytest.approx(num, rel=1e-5, abs=1e-9)


def test_surrogate_tends_to_the_exact_energy(haar, rng):
    data = _random_image(haar, 4, rng)
    em = EnergyModel(data, OperatorSpec.identity(), haar, ModelParams())
    # low contrast keeps the coefficients under the clamp, where smoothing matters
    u = np.where(data.mask, 0.02 * rng.random(data.shape), 0.0)
    exact = em.energy(u)
    gaps = [abs(em.smooth(u, eps)[0] - exact) for eps in (1e-1, 1e-3, 1e-5)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-3 * max(exact, 1.0)


def test_solver_params_validation():
    with pytest.raises(ValueError):
        SolverParams(schedule=(1.0, 1.0))
    with pytest.raises(ValueError):
        SolverParams(schedule=(0.1, 0.0))
    with pytest.raises(ValueError):
        SolverParams(model=ModelParams(p=3.0))
    with pytest.raises(ValueError):
        SolverParams(model=ModelParams(r=2.0))
    p = SolverParams(model=ModelParams(alpha=2.0), schedule=(1.0, 0.1), seed=5)
    assert SolverParams.from_dict(p.to_dict()) == p


def test_constant_data_is_a_fixed_point(haar):
    data = empty_image(UNIT, haar, 4)
    data.values = np.where(data.mask, 0.4, 0.0)
    trace = restore(data, OperatorSpec.identity(), haar, SolverParams(schedule=(1.0, 0.1)))
    assert trace.energies()[-1] == pytest.approx(0.0, abs=1e-14)


def test_trace_is_monotone_and_matches_the_returned_image(haar):
    rng = np.random.default_rng(3)
    data = _random_image(haar, 5, rng)
    trace = restore(data, OperatorSpec.box_blur(3), haar)
    e = trace.energies()
    assert all(b <= a for a, b in zip(e, e[1:]))
    em = EnergyModel(data, OperatorSpec.box_blur(3), haar, ModelParams())
    assert em.energy(trace.image.values) == pytest.approx(e[-1], rel=1e-12)
    assert e[-1] <= em.energy(initial_guess(data)) + 1e-15
    lines = trace.to_csv().splitlines()
    assert lines[0] == "round,eps,iterations,surrogate,iterate,energy"
    assert len(lines) == 1 + len(SolverParams().schedule)


def test_initial_guess_fills_unobserved_pixels(haar):
    data = empty_image(UNIT, haar, 4)
    data.values = np.where(data.mask, 1.0, 0.0)
    data.observed = np.ones(data.shape, bool)
    data.observed[5:9, 5:9] = False
    u = initial_guess(data)
    np.testing.assert_allclose(u[data.mask], 1.0)


@pytest.mark.parametrize("seed", [0, 1])
def test_solver_reaches_the_exhaustive_minimum_on_tiny_instances(seed):
    haar = frame_system("haar", 8)
    rng = np.random.default_rng(seed)
    data = empty_image(TINY, haar, 2)
    assert data.mask.sum() == 9
    data.values = np.where(data.mask, rng.choice(LEVELS, data.shape), 0.0)
    params = SolverParams()
    best, _ = brute_force_min(data, OperatorSpec.identity(), haar, params, LEVELS)
    trace = restore(data, OperatorSpec.identity(), haar, params)
    assert trace.energies()[-1] <= best * 1.05 + 1e-15


def test_oracle_refuses_large_instances(haar):
    data = empty_image(UNIT, haar, 3)
    with pytest.raises(SolverError):
        brute_force_min(data, OperatorSpec.identity(), haar, SolverParams(), LEVELS)


def test_nan_data_is_a_numerical_failure(haar):
    data = empty_image(UNIT, haar, 3)
    data.values[data.mask] = math.nan
    with pytest.raises(SolverError):
        restore(data, OperatorSpec.identity(), haar)
