"""Explicit Runge-Kutta stepping and fixed-step trajectories."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DivergenceError",
    "Trajectory",
    "StepCoefficients",
    "rk_step",
    "integrate",
    "OVERFLOW_GUARD",
]

OVERFLOW_GUARD = 1e8

Model = Callable[[float, Sequence], list]


class DivergenceError(ArithmeticError):
    """The discrete flow left the overflow guard.

    ``step`` is the index of the first offending state; ``trajectory`` holds
    the states accepted before it.
    """

    def __init__(self, step: int, trajectory: "Trajectory | None" = None):
        super().__init__(f"integration diverged at step {step}")
        self.step = step
        self.trajectory = trajectory


@dataclass(frozen=True)
class Trajectory:
    """States on the uniform grid ``t0 + k h``; ``states`` has shape (n+1, s)."""

    t0: float
    h: float
    states: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states))
        if states.shape[0] == 0:
            raise ValueError("a trajectory needs at least one state")
        if self.h <= 0:
            raise ValueError("h must be positive")
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(len(self))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"z{i + 1}" for i in range(self.dim)])
            for t, row in zip(self.times, self.states):
                w.writerow([_fmt(t)] + [_fmt(x) for x in row])

    @classmethod
    def from_csv(cls, path, rtol: float = 1e-9) -> "Trajectory":
        """Read a trajectory CSV; the time column must be uniformly spaced."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], [r for r in rows[1:] if r]
        if not header or header[0].strip() != "t":
            raise ValueError(f"{path}: first column must be 't'")
        data = np.array([[float(x) for x in r] for r in body])
        if data.ndim != 2 or data.shape[1] != len(header):
            raise ValueError(f"{path}: ragged trajectory CSV")
        t = data[:, 0]
        if len(t) == 1:
            return cls(float(t[0]), 1.0, data[:, 1:])
        h = (t[-1] - t[0]) / (len(t) - 1)
        if h <= 0 or np.max(np.abs(np.diff(t) - h)) > rtol * max(1.0, abs(t[-1])) + 1e-12:
            raise ValueError(f"{path}: time column is not uniformly spaced")
        return cls(float(t[0]), float(h), data[:, 1:])


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _is_zero(a) -> bool:
    return type(a) in (float, int) and a == 0


class StepCoefficients:
    """``h*A`` (lower triangle only), ``h*b`` and ``c`` for a fixed step size.

    Computing these once and reusing them across many steps keeps tape
    recordings small when the coefficients are Vars.
    """

    __slots__ = ("hA", "hb", "c", "h")

    def __init__(self, tab, h):
        q = len(tab.b)
        self.h = h
        self.hA = [
            [(j, h * tab.A[i][j]) for j in range(i) if not _is_zero(tab.A[i][j])] for i in range(q)
        ]
        self.hb = [(i, h * tab.b[i]) for i in range(q) if not _is_zero(tab.b[i])]
        self.c = list(tab.c)

    def step(self, model: Model, tn, z):
        ks = []
        for i, row in enumerate(self.hA):
            zi = list(z)
            for j, ha in row:
                kj = ks[j]
                for m in range(len(zi)):
                    zi[m] = zi[m] + ha * kj[m]
            ci = self.c[i]
            ks.append(model(tn if _is_zero(ci) else tn + ci * self.h, zi))
        out = list(z)
        for i, hb in self.hb:
            ki = ks[i]
            for m in range(len(out)):
                out[m] = out[m] + hb * ki[m]
        return out


def rk_step(tab, model: Model, tn, z, h):
    """One explicit RK step ``z + h sum_i b_i k_i``.

    ``k_i = f(tn + c_i h, z + h sum_{j<i} a_ij k_j)``.  Works on any scalar
    type the model supports (floats, complex, tape Vars, ComplexPair).
    """
    if isinstance(h, (int, float)) and h <= 0:
        raise ValueError("step size must be positive")
    return StepCoefficients(tab, h).step(model, tn, list(z))


def _finite_within(z, guard: float) -> bool:
    for v in z:
        a = abs(v)
        if not (a <= guard):  # catches nan as well
            return False
    return True


def integrate(
    tab,
    model: Model,
    z0: Sequence,
    t0: float,
    h: float,
    n: int,
    guard: float = OVERFLOW_GUARD,
) -> Trajectory:
    """Apply ``n`` RK steps from ``z0``; raises :class:`DivergenceError` when a
    component becomes non-finite or exceeds ``guard`` in magnitude."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if h <= 0:
        raise ValueError("h must be positive")
    coeffs = StepCoefficients(tab, h)
    z = list(z0)
    states = [list(z)]
    for k in range(n):
        z = coeffs.step(model, t0 + k * h, z)
        if not _finite_within(z, guard):
            raise DivergenceError(k + 1, Trajectory(t0, h, np.array(states)))
        states.append(z)
    return Trajectory(t0, h, np.array(states))

