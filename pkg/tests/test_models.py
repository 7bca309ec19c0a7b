import math

import numpy as np
import pytest

from adrk.models import (
    DimensionError,
    LinearScalarOde,
    Lorenz63,
    Lorenz96,
    LqmParams,
    ZeroOde,
    analytic_linear_solution,
    eval_linear,
    eval_lorenz63,
    eval_lorenz96,
    eval_lqm,
    lorenz63_fixed_points,
)


@pytest.mark.parametrize("lam, z, expected", [(-2.0, 1.0, -2.0), (-4.0, 0.0, 0.0), (-1j, 1.0, -1j)])
def test_eval_linear(lam, z, expected):
    assert eval_linear(LinearScalarOde(lam), 0.0, z) == expected


def test_real_valued_complex_rate_is_stored_as_float():
    assert isinstance(LinearScalarOde(complex(-2, 0)).lam, float)


def test_analytic_linear_solution():
    ode = LinearScalarOde(-2.0)
    assert analytic_linear_solution(ode, 0.5, 0.0) == 0.5
    assert analytic_linear_solution(ode, 0.5, 1.0) == pytest.approx(0.5 * math.exp(-2.0), rel=1e-14)
    assert analytic_linear_solution(LinearScalarOde(0.0), 1.0, 10.0) == 1.0
    with pytest.raises(ValueError):
        analytic_linear_solution(ode, 1.0, -1.0)


def test_lorenz63_examples():
    p = Lorenz63()
    assert eval_lorenz63(p, [0.0, 0.0, 0.0]) == [0.0, 0.0, 0.0]
    r = math.sqrt(72.0)
    np.testing.assert_allclose(eval_lorenz63(p, [r, r, 27.0]), [0.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(eval_lorenz63(p, [1.0, 1.0, 1.0]), [0.0, 26.0, -5.0 / 3.0], rtol=1e-14)


def test_lorenz63_fixed_points_are_stationary():
    p = Lorenz63()
    for fp in lorenz63_fixed_points(p):
        np.testing.assert_allclose(eval_lorenz63(p, list(fp)), 0.0, atol=1e-12)


def test_lorenz96_homogeneous_fixed_point():
    for dim in (4, 7, 40):
        p = Lorenz96(8.0, dim)
        assert eval_lorenz96(p, [8.0] * dim) == [0.0] * dim


def test_lorenz96_hand_evaluation():
    # dz_i/dt = (z_{i+1} - z_{i-2}) z_{i-1} - z_i + F, cyclic, with z = e_1 and F = 0
    out = eval_lorenz96(Lorenz96(0.0, 4), [1.0, 0.0, 0.0, 0.0])
    assert out == [-1.0, 0.0, 0.0, 0.0]
    out = eval_lorenz96(Lorenz96(0.0, 4), [1.0, 2.0, 3.0, 4.0])
    # i=0: (2-3)*4 - 1; i=1: (3-4)*1 - 2; i=2: (4-1)*2 - 3; i=3: (1-2)*3 - 4
    assert out == [-5.0, -3.0, 3.0, -7.0]


def test_lorenz96_dimension_error():
    with pytest.raises(DimensionError):
        Lorenz96(8.0, 3)
    with pytest.raises(DimensionError):
        Lorenz96(8.0, 5)(0.0, [1.0, 2.0, 3.0])


def test_zero_model():
    assert ZeroOde(3)(0.0, [1.0, -2.0, 5.0]) == [0.0, 0.0, 0.0]


def test_lqm_zero_params():
    assert eval_lqm(LqmParams.zeros(3), [1.0, 2.0, 3.0]) == [0.0, 0.0, 0.0]


def test_lqm_embeds_lorenz63():
    p = Lorenz63()
    np.testing.assert_allclose(eval_lqm(LqmParams.lorenz63(p), [1.0, 2.0, 3.0]), eval_lorenz63(p, [1.0, 2.0, 3.0]))


def test_lqm_affine_when_quadratic_vanishes(rng):
    b, L = rng.normal(size=3), rng.normal(size=(3, 3))
    p = LqmParams.from_arrays(b, L, np.zeros((3, 3, 3)))
    z = rng.normal(size=3)
    f0 = np.array(eval_lqm(p, [0.0] * 3))
    f1 = np.array(eval_lqm(p, z.tolist()))
    f2 = np.array(eval_lqm(p, (2 * z).tolist()))
    np.testing.assert_allclose(f2 - f0, 2 * (f1 - f0), rtol=1e-12)


def test_lqm_shape_errors():
    with pytest.raises(DimensionError):
        LqmParams.from_arrays(np.zeros(3), np.zeros((3, 2)), np.zeros((3, 3, 3)))
    with pytest.raises(DimensionError):
        eval_lqm(LqmParams.zeros(3), [1.0, 2.0])


def test_lqm_flat_and_json_roundtrip(tmp_path, rng):
    p = LqmParams.from_arrays(rng.normal(size=2), rng.normal(size=(2, 2)), rng.normal(size=(2, 2, 2)))
    assert LqmParams.from_flat(p.flat(), 2) == p
    p.save(tmp_path / "lqm.json")
    assert LqmParams.load(tmp_path / "lqm.json") == p
