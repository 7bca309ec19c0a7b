"""Ground-truth trajectories from an adaptive Dormand-Prince 4(5) pair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrate import Trajectory

__all__ = ["SolverError", "DenseSolution", "adaptive_integrate", "subsample", "reference_trajectory"]

# Dormand-Prince 5(4) coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
_A_ROWS = [np.array(r) for r in _A]

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
# PI controller exponents (Gustafsson), scaled for the 4th-order error estimate
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5


class SolverError(RuntimeError):
    """Step size underflow or non-finite state in the reference solver."""


@dataclass(frozen=True)
class DenseSolution:
    """Accepted step endpoints ``(t_k, z_k)``; ``ts`` is increasing."""

    ts: np.ndarray
    states: np.ndarray

    def covers(self, t0: float, t1: float) -> bool:
        return self.ts[0] <= t0 and self.ts[-1] >= t1

    def at(self, t: float) -> np.ndarray:
        """State at an accepted step time (exact match required; no interpolation)."""
        k = int(np.searchsorted(self.ts, t))
        if k >= len(self.ts) or self.ts[k] != t:
            raise ValueError(f"t={t!r} is not an accepted step time")
        return self.states[k]


def _f(model, t, z):
    return np.array(model(t, z.tolist()), dtype=float)


def _dp_step(model, t, z, h, k1):
    K = np.empty((7, z.shape[0]))
    K[0] = k1
    for i in range(1, 7):
        K[i] = _f(model, t + _C[i] * h, z + h * (_A_ROWS[i] @ K[:i]))
    z5 = z + h * (_B5 @ K)
    err = h * (_E @ K)
    return z5, err, K[6]


def adaptive_integrate(
    model,
    z0,
    t0: float,
    t_end: float,
    rtol: float = 1e-9,
    atol: float = 1e-9,
    grid=None,
    h_init: float | None = None,
    min_step: float = 1e-14,
    max_steps: int = 10_000_000,
) -> DenseSolution:
    """Integrate from ``t0`` to ``t_end`` with local error control.

    A step is accepted when the scaled error norm
    ``max_i |err_i| / (atol + rtol max(|z_i|, |z_new_i|))`` is at most 1.
    Step endpoints are forced onto every time in ``grid`` (and onto
    ``t_end``), so those times appear exactly in the output.

    Raises
    ------
    SolverError
        If the step size falls below ``min_step * max(1, |t|)`` or the state
        becomes non-finite.
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("rtol and atol must be positive")
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    stops = [float(t_end)] if grid is None else sorted({float(g) for g in grid if t0 < g <= t_end} | {float(t_end)})
    z = np.asarray(z0, dtype=float).copy()
    t = float(t0)
    k1 = _f(model, t, z)
    if h_init is None:
        scale = atol + rtol * np.abs(z)
        d0 = np.max(np.abs(z) / scale)
        d1 = np.max(np.abs(k1) / scale)
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    else:
        h = float(h_init)
    h = min(h, t_end - t0)
    ts, zs = [t], [z.copy()]
    err_prev = 1e-4
    stop_idx = 0
    steps = 0
    while t < t_end:
        steps += 1
        if steps > max_steps:
            raise SolverError("step budget exhausted")
        target = stops[stop_idx]
        forced = t + h >= target
        h_try = target - t if forced else h
        if h_try < min_step * max(1.0, abs(t)):
            raise SolverError(f"step size underflow at t={t:.6g}")
        z_new, err, k_last = _dp_step(model, t, z, h_try, k1)
        if not np.all(np.isfinite(z_new)):
            h = 0.25 * h_try
            continue
        scale = atol + rtol * np.maximum(np.abs(z), np.abs(z_new))
        en = float(np.max(np.abs(err) / scale))
        if en <= 1.0:
            t = target if forced else t + h_try
            z = z_new
            k1 = k_last
            ts.append(t)
            zs.append(z.copy())
            if forced:
                stop_idx += 1
            if en == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * en ** (-_ALPHA) * max(err_prev, 1e-4) ** _BETA
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            # a forced step may be much shorter than h; don't let it shrink h
            h = min(max(h, h_try) * factor if forced else h_try * factor, t_end - t0)
            err_prev = max(en, 1e-4)
        else:
            factor = max(_MIN_FACTOR, _SAFETY * en ** (-1.0 / 5))
            h = h_try * factor
    return DenseSolution(np.array(ts), np.array(zs))


def subsample(dense: DenseSolution, t0: float, h: float, n: int) -> Trajectory:
    """States at ``t0 + k h`` for ``k = 0..n``, read from accepted step times.

    Raises ``ValueError`` when a grid time is outside the solution or was not
    an accepted step endpoint.
    """
    if n < 0 or h <= 0:
        raise ValueError("need n >= 0 and h > 0")
    times = t0 + h * np.arange(n + 1)
    if not dense.covers(times[0], times[-1]):
        raise ValueError("dense output does not cover the requested grid")
    return Trajectory(t0, h, np.array([dense.at(float(t)) for t in times]))


def reference_trajectory(
    model,
    z0,
    h: float,
    n: int,
    t0: float = 0.0,
    rtol: float = 1e-9,
    atol: float = 1e-9,
    spin_up: float = 0.0,
) -> Trajectory:
    """Adaptive solution sampled every ``h`` for ``n`` steps.

    With ``spin_up > 0`` the model is first integrated over ``spin_up`` time
    units and the grid starts from that state (still labelled ``t0``).
    """
    z0 = np.asarray(z0, dtype=float)
    if spin_up > 0:
        z0 = adaptive_integrate(model, z0, t0, t0 + spin_up, rtol, atol).states[-1]
    if n == 0:
        return Trajectory(t0, h, z0[None, :])
    times = t0 + h * np.arange(n + 1)
    dense = adaptive_integrate(model, z0, t0, float(times[-1]), rtol, atol, grid=times[1:])
    return subsample(dense, t0, h, n)
