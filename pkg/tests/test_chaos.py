import numpy as np

from adrk.chaos import BLOW_UP, CHAOTIC, FIXED_POINT, OTHER, ChaosThresholds, classify, largest_lyapunov
from adrk.models import LinearScalarOde, Lorenz63, ZeroOde
from adrk.tableau import euler_tableau, rk4_tableau


def test_rk4_lorenz_chaotic_at_small_step():
    result, traj = classify(rk4_tableau(), Lorenz63(), [1.0, 1.0, 1.0], 0.1, 5000)
    assert result.label == CHAOTIC
    assert 0.5 < result.lyapunov < 1.5
    assert len(traj) == 5001


def test_rk4_lorenz_not_chaotic_at_large_step():
    result, _ = classify(rk4_tableau(), Lorenz63(), [1.0, 1.0, 1.0], 0.17, 5000)
    assert result.label in (BLOW_UP, FIXED_POINT)
    result, _ = classify(rk4_tableau(), Lorenz63(), [1.0, 1.0, 1.0], 0.19, 5000)
    assert result.label != CHAOTIC


def test_zero_rhs_is_fixed_point():
    result, _ = classify(euler_tableau(), ZeroOde(3), [1.0, 2.0, 3.0], 0.1, 100)
    assert result.label == FIXED_POINT
    assert "fixed-point" in result.summary()


def test_unstable_linear_blows_up():
    result, traj = classify(euler_tableau(), LinearScalarOde(1.0), [1.0], 0.5, 1000)
    assert result.label == BLOW_UP and result.diverged_at == len(traj)
    assert "diverged_at" in result.summary()


def test_neutral_oscillation_is_other():
    def rotation(t, z):
        return [-z[1], z[0]]

    result, _ = classify(rk4_tableau(), rotation, [1.0, 0.0], 0.05, 4000)
    assert result.label == OTHER
    assert abs(result.lyapunov) < 0.1


def test_lyapunov_of_linear_decay():
    lyap = largest_lyapunov(rk4_tableau(), LinearScalarOde(-1.0), [1.0], 0.01, 1000)
    assert np.isclose(lyap, -1.0, atol=1e-3)


def test_thresholds_are_configurable():
    strict = ChaosThresholds(lyapunov_min=10.0)
    result, _ = classify(rk4_tableau(), Lorenz63(), [1.0, 1.0, 1.0], 0.1, 2000, strict)
    assert result.label == OTHER
