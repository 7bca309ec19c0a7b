"""Right-hand sides ``f(t, z)`` used by the integrators and the training losses.

Every model is a callable ``model(t, z) -> list`` built from plain scalar
arithmetic, so the same code runs on floats, complex numbers, tape
:class:`~adrk.autodiff.Var` objects and :class:`~adrk.autodiff.ComplexPair`.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "DimensionError",
    "LinearScalarOde",
    "Lorenz63",
    "Lorenz96",
    "LqmParams",
    "LqmModel",
    "ZeroOde",
    "eval_linear",
    "analytic_linear_solution",
    "eval_lorenz63",
    "eval_lorenz96",
    "eval_lqm",
    "lorenz63_fixed_points",
]


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class LinearScalarOde:
    """``z' = lam * z`` with a real or complex rate."""

    lam: complex = -1.0

    def __post_init__(self):
        lam = self.lam
        if isinstance(lam, complex) and lam.imag == 0.0:
            object.__setattr__(self, "lam", lam.real)

    dim = 1

    def __call__(self, t, z):
        return [self.lam * z[0]]


def eval_linear(ode: LinearScalarOde, t, z):
    return ode.lam * z


def analytic_linear_solution(ode: LinearScalarOde, z0, t: float):
    if t < 0:
        raise ValueError("t must be non-negative")
    lam = ode.lam
    if isinstance(lam, complex) or isinstance(z0, complex):
        return z0 * cmath.exp(lam * t)
    return z0 * math.exp(lam * t)


@dataclass(frozen=True)
class Lorenz63:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    dim = 3

    def __call__(self, t, z):
        if len(z) != 3:
            raise DimensionError(f"Lorenz-63 state has 3 components, got {len(z)}")
        x, y, w = z
        return [self.sigma * (y - x), self.rho * x - y - x * w, x * y - self.beta * w]


def eval_lorenz63(p: Lorenz63, z):
    return p(0.0, z)


def lorenz63_fixed_points(p: Lorenz63 = Lorenz63()) -> list[tuple[float, float, float]]:
    r = math.sqrt(p.beta * (p.rho - 1.0))
    return [(0.0, 0.0, 0.0), (r, r, p.rho - 1.0), (-r, -r, p.rho - 1.0)]


@dataclass(frozen=True)
class Lorenz96:
    """``z_i' = (z_{i+1} - z_{i-2}) z_{i-1} - z_i + F`` with cyclic indices."""

    forcing: float = 8.0
    dim: int = 40

    def __post_init__(self):
        if self.dim < 4:
            raise DimensionError("Lorenz-96 needs at least 4 components")

    def __call__(self, t, z):
        n = len(z)
        if n < 4:
            raise DimensionError("Lorenz-96 needs at least 4 components")
        F = self.forcing
        return [(z[(i + 1) % n] - z[i - 2]) * z[i - 1] - z[i] + F for i in range(n)]


def eval_lorenz96(p: Lorenz96, z):
    return p(0.0, z)


@dataclass(frozen=True)
class ZeroOde:
    dim: int = 1

    def __call__(self, t, z):
        return [0.0 * zi for zi in z]


@dataclass(frozen=True)
class LqmParams:
    """Bias, linear and dense quadratic coefficients of a linear-quadratic model.

    Component ``i`` of the right-hand side is
    ``bias[i] + sum_j linear[i][j] z_j + sum_jk quadratic[i][j][k] z_j z_k``.
    """

    bias: tuple
    linear: tuple
    quadratic: tuple

    def __post_init__(self):
        s = len(self.bias)
        if len(self.linear) != s or any(len(r) != s for r in self.linear):
            raise DimensionError("linear block must be s x s")
        if len(self.quadratic) != s or any(
            len(m) != s or any(len(r) != s for r in m) for m in self.quadratic
        ):
            raise DimensionError("quadratic block must be s x s x s")

    @property
    def dim(self) -> int:
        return len(self.bias)

    @classmethod
    def from_arrays(cls, bias, linear, quadratic) -> "LqmParams":
        b = np.asarray(bias, dtype=float)
        L = np.asarray(linear, dtype=float)
        Q = np.asarray(quadratic, dtype=float)
        s = b.shape[0]
        if b.ndim != 1 or L.shape != (s, s) or Q.shape != (s, s, s):
            raise DimensionError(f"inconsistent LQM shapes {b.shape}, {L.shape}, {Q.shape}")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(L)) and np.all(np.isfinite(Q))):
            raise ValueError("LQM parameters must be finite")
        return cls(
            tuple(b.tolist()),
            tuple(tuple(r) for r in L.tolist()),
            tuple(tuple(tuple(r) for r in m) for m in Q.tolist()),
        )

    @classmethod
    def zeros(cls, s: int) -> "LqmParams":
        return cls.from_arrays(np.zeros(s), np.zeros((s, s)), np.zeros((s, s, s)))

    @classmethod
    def lorenz63(cls, p: Lorenz63 = Lorenz63()) -> "LqmParams":
        L = np.array([[-p.sigma, p.sigma, 0.0], [p.rho, -1.0, 0.0], [0.0, 0.0, -p.beta]])
        Q = np.zeros((3, 3, 3))
        Q[1, 0, 2] = -1.0
        Q[2, 0, 1] = 1.0
        return cls.from_arrays(np.zeros(3), L, Q)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.array(self.bias), np.array(self.linear), np.array(self.quadratic)

    def flat(self) -> list[float]:
        b, L, Q = self.arrays()
        return np.concatenate([b, L.ravel(), Q.ravel()]).tolist()

    @classmethod
    def from_flat(cls, values: Sequence[float], s: int) -> "LqmParams":
        v = np.asarray(values, dtype=float)
        if v.size != s + s * s + s**3:
            raise DimensionError("flat LQM vector has the wrong length")
        return cls.from_arrays(v[:s], v[s : s + s * s].reshape(s, s), v[s + s * s :].reshape(s, s, s))

    def model(self) -> "LqmModel":
        return LqmModel(self.bias, self.linear, self.quadratic)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "bias": list(self.bias),
            "linear": [list(r) for r in self.linear],
            "quadratic": [[list(r) for r in m] for m in self.quadratic],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LqmParams":
        p = cls.from_arrays(d["bias"], d["linear"], d["quadratic"])
        if "dim" in d and int(d["dim"]) != p.dim:
            raise DimensionError(f"dim field {d['dim']} does not match coefficients ({p.dim})")
        return p

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "LqmParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


class LqmModel:
    """Evaluator for a linear-quadratic right-hand side.

    Coefficients may be floats or tape Vars.  The quadratic tensor is folded
    into its symmetric part over pairs ``j <= k`` once at construction; exact
    float zeros are skipped.
    """

    def __init__(self, bias, linear, quadratic):
        s = len(bias)
        self.dim = s
        self.bias = list(bias)
        self.linear = [[(j, c) for j, c in enumerate(row) if not _is_zero(c)] for row in linear]
        pairs = []
        for i in range(s):
            row = []
            for j, k in product(range(s), repeat=2):
                if k < j:
                    continue
                c = quadratic[i][j][k] if j == k else _add(quadratic[i][j][k], quadratic[i][k][j])
                if not _is_zero(c):
                    row.append((j, k, c))
            pairs.append(row)
        self.quad = pairs
        self._pairs = sorted({(j, k) for row in pairs for j, k, _ in row})

    def __call__(self, t, z):
        if len(z) != self.dim:
            raise DimensionError(f"state has {len(z)} components, model expects {self.dim}")
        zz = {(j, k): z[j] * z[k] for j, k in self._pairs}
        out = []
        for i in range(self.dim):
            acc = None if _is_zero(self.bias[i]) else self.bias[i]
            for j, c in self.linear[i]:
                term = c * z[j]
                acc = term if acc is None else acc + term
            for j, k, c in self.quad[i]:
                term = c * zz[j, k]
                acc = term if acc is None else acc + term
            out.append(0.0 if acc is None else acc)
        return out


def _is_zero(c) -> bool:
    return type(c) in (float, int) and c == 0


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


def eval_lqm(p: LqmParams, z):
    if len(z) != p.dim:
        raise DimensionError(f"state has {len(z)} components, LQM expects {p.dim}")
    return p.model()(0.0, z)
