"""Experiment recipes shared by the runner scripts and the acceptance suite.

Each recipe is a frozen dataclass of settings plus a ``run`` function that
returns plain results; nothing here writes files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chaos import ChaosThresholds, Classification, classify
from .integrate import StepCoefficients, Trajectory
from .models import Lorenz63, LqmParams
from .reference import reference_trajectory
from .stability import axis_stability_limit, estimate_order, stability_poly_coeffs
from .tableau import ButcherTableau
from .training import TrainConfig, TrainRun, stability_config, train_joint, train_ode_adapted, train_stability


def lorenz63_data(h: float, n: int, z0=(1.0, 1.0, 1.0), spin_up: float = 10.0) -> Trajectory:
    """Reference Lorenz-63 samples on the attractor."""
    return reference_trajectory(Lorenz63(), list(z0), h, n, spin_up=spin_up)


def forecast_rmse(tab: ButcherTableau, model, states: np.ndarray, h: float, horizon: int = 1) -> float:
    """RMSE of ``horizon``-step forecasts started from every state that has a target.

    Returns ``inf`` if any forecast leaves the finite range.
    """
    coeffs = StepCoefficients(tab, h)
    errs = []
    for k in range(len(states) - horizon):
        z = states[k].tolist()
        for _ in range(horizon):
            z = coeffs.step(model, 0.0, z)
        e = np.asarray(z) - states[k + horizon]
        if not np.all(np.isfinite(e)):
            return math.inf
        errs.append(e)
    return float(np.sqrt(np.mean(np.square(errs))))


# --- stability design -------------------------------------------------------------


@dataclass(frozen=True)
class StabilityExperiment:
    q: int = 4
    lam: complex = -4.0
    h_f: float | None = None
    config: TrainConfig = field(default_factory=stability_config)

    @property
    def axis(self) -> str:
        return "real" if complex(self.lam).imag == 0.0 else "imaginary"

    @property
    def target(self) -> float:
        """Theoretical interval end in ``|lam h|``: ``2 q^2`` (real) or ``q - 1`` (imaginary)."""
        return 2.0 * self.q**2 if self.axis == "real" else float(self.q - 1)

    def step_limit(self) -> float:
        return self.h_f if self.h_f is not None else self.target / abs(self.lam)


@dataclass
class StabilityResult:
    run: TrainRun
    tableau: ButcherTableau
    limit: float
    order: int
    coeffs: tuple


def run_stability(exp: StabilityExperiment) -> StabilityResult:
    run, tab = train_stability(exp.q, exp.lam, exp.step_limit(), exp.config)
    p = stability_poly_coeffs(tab)
    return StabilityResult(run, tab, axis_stability_limit(tab, exp.axis), estimate_order(p), p.coeffs)


# --- Lorenz-63 integration table ------------------------------------------------------


@dataclass(frozen=True)
class LorenzTableExperiment:
    """Train a 4-stage scheme on reference data at ``h_train``, then classify both schemes."""

    h_train: float = 0.15
    samples: int = 4000
    spin_up: float = 10.0
    steps: int = 5000
    config: TrainConfig = field(
        default_factory=lambda: TrainConfig(lr_rk=3e-3, batch_size=128, grad_clip=1.0, patience=1000, iterations=3000)
    )


@dataclass
class LorenzTableResult:
    run: TrainRun
    tableau: ButcherTableau
    data: Trajectory


def train_lorenz_table(exp: LorenzTableExperiment) -> LorenzTableResult:
    data = lorenz63_data(exp.h_train, exp.samples, spin_up=exp.spin_up)
    run, tab = train_ode_adapted(4, Lorenz63(), data, exp.config)
    return LorenzTableResult(run, tab, data)


def classify_lorenz(tab: ButcherTableau, h: float, z0, steps: int = 5000) -> Classification:
    return classify(tab, Lorenz63(), list(z0), h, steps, ChaosThresholds())[0]


# --- joint identification -----------------------------------------------------------


@dataclass(frozen=True)
class JointExperiment:
    q: int = 11
    h: float = 0.2
    samples: int = 4000
    held_out: int = 100
    spin_up: float = 10.0
    free_run_steps: int = 5000
    config: TrainConfig = field(
        default_factory=lambda: TrainConfig(lr_rk=1e-4, lr_nn=2.0, iterations=4000, batch_size=32, seed=0)
    )


@dataclass
class JointResult:
    run: TrainRun
    tableau: ButcherTableau
    lqm: LqmParams
    rmse_1: float
    rmse_4: float
    alpha: tuple
    free_run: Classification


def split_windows(data: Trajectory, held_out: int) -> tuple[Trajectory, np.ndarray]:
    """Training trajectory and the last ``held_out`` windows (``held_out + 1`` states)."""
    if not 0 < held_out < len(data) - 1:
        raise ValueError("held_out must leave at least one training window")
    train = Trajectory(data.t0, data.h, data.states[:-held_out])
    return train, data.states[-held_out - 1 :]


def run_joint(exp: JointExperiment, data: Trajectory | None = None) -> JointResult:
    if data is None:
        data = lorenz63_data(exp.h, exp.samples, spin_up=exp.spin_up)
    train, test = split_windows(data, exp.held_out)
    run, tab, lqm = train_joint(exp.q, data.dim, train, exp.config)
    model = lqm.model()
    r1 = forecast_rmse(tab, model, test, exp.h, 1)
    r4 = forecast_rmse(tab, model, test, exp.h, 4)
    free = classify(tab, model, test[-1].tolist(), exp.h, exp.free_run_steps, ChaosThresholds())[0]
    return JointResult(run, tab, lqm, r1, r4, stability_poly_coeffs(tab).coeffs, free)
