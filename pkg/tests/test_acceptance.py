"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``[criterion N] PASS|FAIL ...`` line to the terminal
(visible without ``-s``).  The expensive training runs are session fixtures
so that each is executed once; criterion 10 deliberately repeats the joint
identification run.
"""

import math

import numpy as np
import pytest

from adrk.autodiff import grad_check
from adrk.chaos import CHAOTIC
from adrk.experiments import (
    JointExperiment,
    LorenzTableExperiment,
    StabilityExperiment,
    classify_lorenz,
    lorenz63_data,
    run_joint,
    run_stability,
    train_lorenz_table,
)
from adrk.integrate import Trajectory, integrate
from adrk.models import LinearScalarOde, Lorenz63, LqmModel, LqmParams
from adrk.stability import (
    estimate_order,
    stability_poly_coeffs,
    stability_value_analytic,
    stability_value_empirical,
)
from adrk.tableau import builtin_tableau, euler_tableau, random_tableau, rk4_tableau, validate_tableau
from adrk.training import (
    TableauVars,
    TrainConfig,
    loss_joint,
    loss_stability,
    loss_trajectory,
    stability_grid,
    tableau_to_flat,
    train_ode_adapted,
)


@pytest.fixture
def report(capsys):
    def _report(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return _report


# --- shared expensive runs ----------------------------------------------------------


@pytest.fixture(scope="session")
def stability_real():
    return run_stability(StabilityExperiment(q=4, lam=-4.0, h_f=8.0))


@pytest.fixture(scope="session")
def stability_imag():
    return run_stability(StabilityExperiment(q=4, lam=-1j, h_f=3.0))


@pytest.fixture(scope="session")
def stability_q7():
    return run_stability(StabilityExperiment(q=7, lam=-4.0))


@pytest.fixture(scope="session")
def joint_data():
    exp = JointExperiment()
    return lorenz63_data(exp.h, exp.samples, spin_up=exp.spin_up)


@pytest.fixture(scope="session")
def joint_result(joint_data):
    return run_joint(JointExperiment(), joint_data)


# --- 1 ------------------------------------------------------------------------------


def test_criterion_01_classical_oracle(report):
    rk4 = stability_poly_coeffs(rk4_tableau())
    expected = (1.0, 1.0, 1 / 2, 1 / 6, 1 / 24)
    err = max(abs(a - b) for a, b in zip(rk4.coeffs, expected))
    euler = stability_poly_coeffs(euler_tableau())
    ok = (
        rk4.degree == 4
        and err <= 1e-12
        and estimate_order(rk4) == 4
        and euler.coeffs == (1.0, 1.0)
        and estimate_order(euler) == 1
    )
    report(1, ok, f"rk4 coeff err {err:.2e}, order {estimate_order(rk4)}; euler {euler.coeffs}, order {estimate_order(euler)}")
    assert ok


# --- 2 ------------------------------------------------------------------------------


def test_criterion_02_analytic_empirical_agreement(report):
    g = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        t = random_tableau(int(g.integers(1, 9)), g)
        z = 10.0 * math.sqrt(g.uniform()) * complex(math.cos(a := g.uniform(0, 2 * math.pi)), math.sin(a))
        worst = max(worst, abs(stability_value_analytic(t, z) - stability_value_empirical(t, z)))
    ok = worst < 1e-10
    report(2, ok, f"max |R_analytic - R_empirical| over 1000 tableaux = {worst:.2e} (< 1e-10)")
    assert ok


# --- 3 ------------------------------------------------------------------------------


def test_criterion_03_gradient_correctness(report):
    g = np.random.default_rng(3)
    data = integrate(rk4_tableau(), Lorenz63(), [1.0, 1.0, 1.0], 0.0, 0.05, 12)
    s = 3
    n_lqm = len(LqmParams.zeros(s).flat())
    worst = {"stability": 0.0, "trajectory": 0.0, "joint": 0.0}
    for k in range(20):
        t = random_tableau(4, g)
        n_rk = len(tableau_to_flat(t))
        lam = -4.0 if k % 2 == 0 else complex(-0.5, -2.0)
        grid = stability_grid(1.2, 10)

        def f_stab(xs, t=t, lam=lam, grid=grid):
            return loss_stability(TableauVars.wrap(xs, t), lam, grid)

        def f_traj(xs, t=t):
            return loss_trajectory(TableauVars.wrap(xs, t), Lorenz63(), data)

        base = LqmParams.lorenz63().flat()
        theta = (np.asarray(base) + 0.3 * g.normal(size=n_lqm)).tolist()

        def f_joint(xs, t=t):
            p = xs[n_rk:]
            bias = p[:s]
            lin = [p[s + i * s : s + (i + 1) * s] for i in range(s)]
            off = s + s * s
            quad = [[p[off + (i * s + j) * s : off + (i * s + j + 1) * s] for j in range(s)] for i in range(s)]
            return loss_joint(TableauVars.wrap(xs[:n_rk], t), LqmModel(bias, lin, quad), data)

        x_rk = tableau_to_flat(t)
        worst["stability"] = max(worst["stability"], grad_check(f_stab, x_rk))
        worst["trajectory"] = max(worst["trajectory"], grad_check(f_traj, x_rk))
        worst["joint"] = max(worst["joint"], grad_check(f_joint, x_rk + theta))
    ok = all(v < 1e-4 for v in worst.values())
    report(3, ok, "max relative error " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (< 1e-4)")
    assert ok


# --- 4 ------------------------------------------------------------------------------


def test_criterion_04_real_axis_training(report, stability_real):
    r = stability_real
    last = r.run.loss_history[-1]
    ok = r.run.converged and last == 0.0 and r.limit >= 31.7 and r.order == 1
    report(
        4,
        ok,
        f"converged={r.run.converged} after {r.run.iterations} it, final loss {last:g}, "
        f"real limit {r.limit:.3f} (>= 31.7), order {r.order} (== 1)",
    )
    assert ok


# --- 5 ------------------------------------------------------------------------------


def test_criterion_05_imaginary_axis_and_scaling(report, stability_imag, stability_q7):
    ri, r7 = stability_imag, stability_q7
    ok_i = ri.limit >= 2.94
    ok_7 = r7.limit >= 0.95 * 2 * 7**2
    report(
        5,
        ok_i and ok_7,
        f"imaginary limit {ri.limit:.4f} (>= 2.94; converged={ri.run.converged}, "
        f"final loss {ri.run.loss_history[-1]:.1e}); q=7 real limit {r7.limit:.2f} (>= 93.1)",
    )
    assert ok_i and ok_7


# --- 6 ------------------------------------------------------------------------------


def test_criterion_06_ode_adapted_linear(report):
    h, n, lam = 0.01, 1000, -2.0
    exact = np.exp(lam * h * np.arange(n + 1))
    data = Trajectory(0.0, h, exact[:, None])
    model = LinearScalarOde(lam)
    run, t = train_ode_adapted(4, model, data, TrainConfig())

    def rmse(tab):
        sim = integrate(tab, model, [1.0], 0.0, h, n).states[:, 0]
        return float(np.sqrt(np.mean((sim - exact) ** 2)))

    a2 = stability_poly_coeffs(t)[2]
    r_adrk, r_euler = rmse(t), rmse(euler_tableau())
    ok = 0.49 <= a2 <= 0.51 and r_adrk < r_euler
    report(6, ok, f"alpha_2 = {a2:.5f} (in [0.49, 0.51]); RMSE {r_adrk:.2e} < Euler {r_euler:.2e}")
    assert ok


# --- 7 ------------------------------------------------------------------------------


@pytest.fixture(scope="session")
def lorenz_table():
    return train_lorenz_table(LorenzTableExperiment())


def test_criterion_07_lorenz_integration_table(report, lorenz_table):
    # both cells start from (1, 1, 1), the CLI default initial state
    rk4 = classify_lorenz(rk4_tableau(), 0.17, [1.0, 1.0, 1.0])
    adrk = classify_lorenz(lorenz_table.tableau, 0.15, [1.0, 1.0, 1.0])
    ok = rk4.label != CHAOTIC and adrk.label == CHAOTIC
    # not gated: the same scheme from four states on the attractor
    starts = lorenz_table.data.states[::1000][:4]
    others = [classify_lorenz(lorenz_table.tableau, 0.15, z).label for z in starts]
    report(
        7,
        ok,
        f"RK4 at h=0.17: {rk4.label}; trained ADRK4 at h=0.15: {adrk.label} "
        f"(lyapunov {adrk.lyapunov:.3g}); from data states 0/1000/2000/3000: {', '.join(others)}",
    )
    assert ok


# --- 8 ------------------------------------------------------------------------------


def test_criterion_08_joint_identification(report, joint_result):
    r = joint_result
    a2 = r.alpha[2]
    ok = r.rmse_1 <= 0.5 and 0.48 <= a2 <= 0.52 and math.isfinite(r.rmse_4) and r.free_run.label == CHAOTIC
    report(
        8,
        ok,
        f"1-step RMSE {r.rmse_1:.4f} (<= 0.5), alpha_2 {a2:.4f} (in [0.48, 0.52]), "
        f"4-step RMSE {r.rmse_4:.4f} (finite), free run {r.free_run.label}",
    )
    assert ok


# --- 9 ------------------------------------------------------------------------------


def test_criterion_09_transcribed_fixtures(report):
    problems = {name: validate_tableau(builtin_tableau(name), 1e-3) for name in ("rk4", "adrk_h1", "adrk_h2", "adrk_h3")}
    p = stability_poly_coeffs(builtin_tableau("adrk_h1"))
    d2, d3 = abs(p[2] - 0.5009), abs(p[3] - 0.1646)
    ok = not any(problems.values()) and d2 <= 1e-2 and d3 <= 1e-2
    report(9, ok, f"validation at 1e-3: {sum(map(len, problems.values()))} problems; |d alpha_2| {d2:.1e}, |d alpha_3| {d3:.1e}")
    assert ok


# --- 10 -----------------------------------------------------------------------------


def test_criterion_10_determinism(report, joint_result, joint_data):
    again = run_joint(JointExperiment(), joint_data)
    a = np.asarray(joint_result.run.loss_history, dtype=np.float64).tobytes()
    b = np.asarray(again.run.loss_history, dtype=np.float64).tobytes()
    ok = a == b and again.tableau == joint_result.tableau and again.lqm == joint_result.lqm
    report(10, ok, f"loss histories byte-identical: {a == b} ({len(again.run.loss_history)} iterations)")
    assert ok
