"""Label a fixed-step simulation as chaotic, fixed-point, blow-up or other."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .integrate import OVERFLOW_GUARD, DivergenceError, StepCoefficients, Trajectory, integrate

__all__ = [
    "CHAOTIC",
    "FIXED_POINT",
    "BLOW_UP",
    "OTHER",
    "ChaosThresholds",
    "Classification",
    "largest_lyapunov",
    "classify",
    "classify_trajectory",
]

CHAOTIC = "chaotic"
FIXED_POINT = "fixed-point"
BLOW_UP = "blow-up"
OTHER = "periodic-or-other"


@dataclass(frozen=True)
class ChaosThresholds:
    tail_fraction: float = 0.2
    fixed_std: float = 1e-3
    lyapunov_min: float = 0.1
    offset: float = 1e-8
    renorm_every: int = 50
    guard: float = OVERFLOW_GUARD


@dataclass
class Classification:
    label: str
    lyapunov: float | None = None
    tail_std: list = field(default_factory=list)
    diverged_at: int | None = None
    thresholds: ChaosThresholds = field(default_factory=ChaosThresholds)

    def summary(self) -> str:
        th = self.thresholds
        parts = [self.label]
        if self.diverged_at is not None:
            parts.append(f"diverged_at={self.diverged_at}")
        if self.tail_std:
            parts.append("tail_std=" + ",".join(f"{s:.3g}" for s in self.tail_std))
        if self.lyapunov is not None:
            parts.append(f"lyapunov={self.lyapunov:.4g}")
        parts.append(
            f"(fixed_std<{th.fixed_std:g} over last {th.tail_fraction:g}; "
            f"chaotic if lyapunov>{th.lyapunov_min:g}; offset {th.offset:g}, renorm every {th.renorm_every})"
        )
        return " ".join(parts)


def largest_lyapunov(
    tab, model, z0, h: float, n: int, offset: float = 1e-8, renorm_every: int = 50, guard: float = OVERFLOW_GUARD
) -> float:
    """Largest Lyapunov exponent (per unit time) of the discrete flow.

    Two copies start ``offset`` apart along the diagonal direction; every
    ``renorm_every`` steps their separation is logged and reset to
    ``offset``.  Returns ``nan`` if fewer than one renormalisation fits in
    ``n`` steps or the perturbed copy leaves the guard.
    """
    coeffs = StepCoefficients(tab, h)
    z = np.asarray(z0, dtype=float)
    direction = np.ones_like(z) / math.sqrt(z.size)
    w = z + offset * direction
    total = 0.0
    blocks = 0
    zl, wl = z.tolist(), w.tolist()
    for k in range(1, n + 1):
        zl = coeffs.step(model, 0.0, zl)
        wl = coeffs.step(model, 0.0, wl)
        if k % renorm_every == 0:
            za, wa = np.asarray(zl), np.asarray(wl)
            if not (np.all(np.isfinite(wa)) and np.all(np.isfinite(za))) or np.abs(wa).max() > guard:
                return float("nan")
            d = float(np.linalg.norm(wa - za))
            if d == 0.0:
                # the copies merged: strongly contracting
                return -math.inf
            total += math.log(d / offset)
            blocks += 1
            wl = (za + (wa - za) * (offset / d)).tolist()
    if blocks == 0:
        return float("nan")
    return total / (blocks * renorm_every * h)


def classify_trajectory(traj: Trajectory, tab=None, model=None, th: ChaosThresholds = ChaosThresholds()) -> Classification:
    """Classify an already simulated (non-diverged) trajectory.

    The Lyapunov estimate restarts from the first state of the tail window,
    so ``tab`` and ``model`` are needed unless the tail is constant.
    """
    states = traj.states
    n = len(states)
    start = min(n - 1, int(math.floor((1.0 - th.tail_fraction) * n)))
    tail = states[start:]
    std = tail.std(axis=0).tolist()
    if max(std) < th.fixed_std:
        return Classification(FIXED_POINT, None, std, None, th)
    if tab is None or model is None:
        raise ValueError("tab and model are required to estimate the Lyapunov exponent")
    lyap = largest_lyapunov(tab, model, tail[0], traj.h, len(tail) - 1, th.offset, th.renorm_every, th.guard)
    label = CHAOTIC if lyap > th.lyapunov_min else OTHER
    return Classification(label, lyap, std, None, th)


def classify(tab, model, z0, h: float, n: int, th: ChaosThresholds = ChaosThresholds()) -> tuple[Classification, Trajectory]:
    """Simulate ``n`` steps from ``z0`` and classify the outcome.

    Returns the classification and the trajectory (truncated before the
    first out-of-guard state on blow-up).
    """
    try:
        traj = integrate(tab, model, z0, 0.0, h, n, th.guard)
    except DivergenceError as err:
        return Classification(BLOW_UP, None, [], err.step, th), err.trajectory
    return classify_trajectory(traj, tab, model, th), traj
