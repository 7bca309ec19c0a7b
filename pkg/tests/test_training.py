import json
import math

import numpy as np
import pytest

from adrk.autodiff import Tape, value_of
from adrk.integrate import Trajectory, integrate
from adrk.models import LinearScalarOde, Lorenz63, LqmParams
from adrk.stability import axis_stability_limit
from adrk.tableau import euler_tableau, rk4_tableau, validate_tableau
from adrk.training import (
    PlateauDecay,
    TableauVars,
    TrainConfig,
    TrainingDivergedError,
    WhitenedLqmBasis,
    loss_joint,
    loss_stability,
    loss_trajectory,
    sgd_step,
    stability_config,
    stability_grid,
    tableau_from_flat,
    tableau_to_flat,
    train_joint,
    train_ode_adapted,
    train_stability,
)


def linear_data(lam=-2.0, h=0.01, n=1000, z0=1.0, t0=0.0):
    states = z0 * np.exp(lam * h * np.arange(n + 1))[:, None]
    return Trajectory(t0, h, states)


def test_stability_loss_examples():
    e = euler_tableau()
    assert loss_stability(e, -1.0, [0.5, 1.0, 1.5, 2.0]) == 0.0
    assert loss_stability(e, -1.0, [0.5, 1.0, 3.0]) == 1.0
    assert loss_stability(rk4_tableau(), -1.0, [1e-9]) == 0.0
    with pytest.raises(ValueError):
        loss_stability(e, -1.0, [])


def test_literal_hinge_lets_gains_cancel():
    e = euler_tableau()
    grid = [1.0, 2.5]  # |R| - 1 = -1 and +0.5
    assert loss_stability(e, -1.0, grid) == 0.5
    assert loss_stability(e, -1.0, grid, literal=True) == 0.0


def test_stability_routes_agree():
    t = rk4_tableau()
    for lam in (-4.0, -1j, -1 + 2j):
        grid = stability_grid(1.5, 10)
        a = loss_stability(t, lam, grid, route="analytic")
        b = loss_stability(t, lam, grid, route="empirical")
        assert a == pytest.approx(b, rel=1e-12, abs=1e-14)


def test_stability_grid():
    assert stability_grid(8.0, 4) == [2.0, 4.0, 6.0, 8.0]


def test_trajectory_loss_euler_linear():
    data = linear_data(n=50)
    expected = sum(abs(math.exp(-0.02) - 0.98) * data.states[n - 1, 0] for n in range(1, 51))
    assert loss_trajectory(euler_tableau(), LinearScalarOde(-2.0), data) == pytest.approx(expected, rel=1e-10)
    single = Trajectory(0.0, 0.01, data.states[:2])
    assert loss_trajectory(euler_tableau(), LinearScalarOde(-2.0), single) == pytest.approx(
        abs(math.exp(-0.02) - 0.98), rel=1e-10
    )


def test_trajectory_loss_zero_for_exact_data():
    data = integrate(rk4_tableau(), Lorenz63(), [1.0, 1.0, 1.0], 0.0, 0.01, 20)
    assert loss_trajectory(rk4_tableau(), Lorenz63(), data) == pytest.approx(0.0, abs=1e-12)


def test_trajectory_loss_time_translation_invariant():
    a = integrate(rk4_tableau(), Lorenz63(), [1.0, 1.0, 1.0], 0.0, 0.05, 30)
    b = Trajectory(7.3, 0.05, a.states)
    t = tableau_from_flat(np.linspace(0.1, 0.6, 10).tolist(), 4, 1e-4)
    assert loss_trajectory(t, Lorenz63(), a) == loss_trajectory(t, Lorenz63(), b)


def test_joint_loss_with_zero_model_is_identity_residual():
    data = integrate(rk4_tableau(), Lorenz63(), [1.0, 1.0, 1.0], 0.0, 0.05, 10)
    expected = sum(np.linalg.norm(data.states[n] - data.states[n - 1]) for n in range(1, 11))
    assert loss_joint(rk4_tableau(), LqmParams.zeros(3), data) == pytest.approx(expected, rel=1e-12)


def test_sgd_step_examples():
    assert sgd_step({"x": [1.0]}, {"x": [2.0]}, {"x": 0.1}) == {"x": [0.8]}
    flat = tableau_to_flat(rk4_tableau())
    out = sgd_step({"rk": flat}, {"rk": [0.0] * len(flat)}, {"rk": 1.0}, q=4)
    assert tableau_from_flat(out["rk"], 4) == rk4_tableau()
    g = [0.0] * 6 + [-1.0, 0.0, 0.0, 0.0]
    out = sgd_step({"rk": flat}, {"rk": g}, {"rk": 0.1}, q=4)
    t = tableau_from_flat(out["rk"], 4)
    assert float(np.sum(t.b)) == pytest.approx(1.0, abs=1e-15)
    assert validate_tableau(t, 1e-12) == []


def test_sgd_step_errors():
    with pytest.raises(TrainingDivergedError) as info:
        sgd_step({"x": [1.0]}, {"x": [math.nan]}, {"x": 0.1}, iteration=7)
    assert info.value.iteration == 7
    with pytest.raises(ValueError):
        sgd_step({"x": [1.0]}, {"x": [1.0, 2.0]}, {"x": 0.1})


def test_normalized_weights_leave_values_but_orthogonalise_gradient():
    t = rk4_tableau()
    tape = Tape()
    tv = TableauVars(tape, t)
    loss = loss_trajectory(tv, LinearScalarOde(-2.0), linear_data(n=20))
    assert value_of(loss) == pytest.approx(loss_trajectory(t, LinearScalarOde(-2.0), linear_data(n=20)), rel=1e-14)
    g = np.array(tape.gradient(loss, tv.vars))[6:]
    assert abs(g @ np.array(t.b)) < 1e-12 * np.linalg.norm(g) + 1e-18


def test_plateau_decay():
    sched = PlateauDecay(0.5, patience=3, smoothing=0.0, rel_tol=1e-3)
    assert [sched.update(x) for x in (1.0, 0.5, 0.5, 0.5, 0.5)] == [False, False, False, False, True]


def test_config_roundtrip_and_validation():
    cfg = TrainConfig(lr_rk=0.2, grid_divisions=[5, 10])
    assert TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"learning_rate": 1.0})
    with pytest.raises(ValueError):
        TrainConfig(lr_rk=0.0)
    assert stability_config().grad_clip == 1.0


def test_zero_budget_returns_initialisation():
    data = linear_data(n=10)
    run, t = train_ode_adapted(4, LinearScalarOde(-2.0), data, TrainConfig(iterations=0))
    assert t == rk4_tableau() and run.iterations == 0
    run, t, p = train_joint(4, 1, data, TrainConfig(iterations=0))
    assert t == rk4_tableau() and p == LqmParams.zeros(1)


def test_exact_data_keeps_parameters():
    data = integrate(euler_tableau(), LinearScalarOde(-2.0), [1.0], 0.0, 0.01, 30)
    run, t = train_ode_adapted(1, LinearScalarOde(-2.0), data, TrainConfig(iterations=5))
    assert t == euler_tableau()
    assert run.loss_history[0] == 0.0


def test_one_stage_stability_training_gives_euler():
    run, t = train_stability(1, -1.0, 2.0, stability_config(iterations=100))
    assert run.converged
    assert axis_stability_limit(t, "real") == pytest.approx(2.0, abs=2e-3)


def test_stability_training_bookkeeping(tmp_path):
    cfg = stability_config(iterations=300, grid_divisions=(5, 10), checkpoint_every=1, checkpoint_dir=str(tmp_path))
    run, t = train_stability(2, -1.0, 4.0, cfg)
    assert len(run.loss_history) == run.iterations <= 300
    assert run.stage_events[0] == {"iteration": 0, "divisions": 5}
    assert validate_tableau(t, 1e-12) == []
    if run.converged:
        assert axis_stability_limit(t, "real") >= 4.0 - 2e-3
    run.save(tmp_path / "run.json")
    assert json.loads((tmp_path / "run.json").read_text())["iterations"] == run.iterations
    snapshots = sorted(p.name for p in tmp_path.glob("tableau_*.json"))
    assert snapshots and snapshots[0] == "tableau_000001.json"


def test_ode_training_is_deterministic_and_reduces_loss():
    data = integrate(rk4_tableau(), Lorenz63(), [1.0, 1.0, 1.0], 0.0, 0.02, 200)
    init = tableau_from_flat([0.3, 0.2, 0.2, 0.1, 0.2, 0.4, 0.25, 0.25, 0.25, 0.25], 4, 1e-4)
    cfg = TrainConfig(lr_rk=1e-2, iterations=40, batch_size=16, seed=3)
    run1, t1 = train_ode_adapted(4, Lorenz63(), data, cfg, init=init)
    run2, t2 = train_ode_adapted(4, Lorenz63(), data, cfg, init=init)
    assert run1.loss_history == run2.loss_history and t1 == t2
    full = [loss_trajectory(t, Lorenz63(), data) for t in (init, t1)]
    assert full[1] < full[0]


def test_whitened_basis_roundtrip(rng):
    states = rng.normal(size=(200, 3)) * [5, 7, 3] + [0, 0, 25]
    basis = WhitenedLqmBasis(states)
    p = LqmParams.lorenz63()
    back = basis.to_params(basis.from_params(p))
    for z in rng.normal(size=(5, 3)) * 10:
        np.testing.assert_allclose(back.model()(0.0, z.tolist()), p.model()(0.0, z.tolist()), atol=1e-9)


def test_joint_training_short_run_is_finite_and_deterministic():
    data = integrate(rk4_tableau(), Lorenz63(), [1.0, 1.0, 1.0], 0.0, 0.05, 60)
    cfg = TrainConfig(lr_rk=1e-4, lr_nn=0.5, iterations=5, batch_size=8, seed=1)
    r1, t1, p1 = train_joint(4, 3, data, cfg)
    r2, t2, p2 = train_joint(4, 3, data, cfg)
    assert r1.loss_history == r2.loss_history and p1 == p2 and t1 == t2
    assert all(math.isfinite(x) for x in r1.loss_history)
    full = TrainConfig(lr_rk=1e-4, lr_nn=0.5, iterations=5, batch_size=0)
    r3, _, _ = train_joint(4, 3, data, full)
    assert r3.loss_history[-1] < r3.loss_history[0]
