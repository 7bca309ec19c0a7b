"""Butcher tableaux for explicit Runge-Kutta schemes."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "ButcherTableau",
    "DegenerateSchemeError",
    "euler_tableau",
    "rk4_tableau",
    "classical_tableau",
    "composed_tableau",
    "warm_start_tableau",
    "random_tableau",
    "validate_tableau",
    "project_constraints",
    "builtin_tableau",
    "BUILTIN_NAMES",
    "load_tableau",
    "save_tableau",
]

DEFAULT_EPS = 1e-4
# sums within a few ulps of their target are left alone (keeps projection idempotent)
_ROUND = 4e-15


class DegenerateSchemeError(ValueError):
    """Raised when the weights cannot be normalised (sum of b is zero)."""


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients ``(A, b, c)`` of a q-stage scheme, stored as float tuples.

    Construction only checks shapes; use :func:`validate_tableau` for the
    Runge-Kutta constraints.
    """

    A: tuple
    b: tuple
    c: tuple

    def __post_init__(self):
        q = len(self.b)
        if q < 1:
            raise ValueError("a tableau needs at least one stage")
        if len(self.c) != q or len(self.A) != q or any(len(r) != q for r in self.A):
            raise ValueError(f"inconsistent tableau shapes for q={q}")

    @property
    def q(self) -> int:
        return len(self.b)

    @classmethod
    def from_arrays(cls, A, b, c=None) -> "ButcherTableau":
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        q = b.shape[0]
        if A.shape != (q, q):
            raise ValueError(f"A must be {q}x{q}, got {A.shape}")
        c = A.sum(axis=1) if c is None else np.asarray(c, dtype=float)
        return cls(
            tuple(tuple(float(x) for x in row) for row in A),
            tuple(float(x) for x in b),
            tuple(float(x) for x in c),
        )

    @property
    def A_array(self) -> np.ndarray:
        return np.array(self.A, dtype=float)

    @property
    def b_array(self) -> np.ndarray:
        return np.array(self.b, dtype=float)

    @property
    def c_array(self) -> np.ndarray:
        return np.array(self.c, dtype=float)

    def to_dict(self) -> dict:
        return {"q": self.q, "A": [list(r) for r in self.A], "b": list(self.b), "c": list(self.c)}

    @classmethod
    def from_dict(cls, d: dict) -> "ButcherTableau":
        t = cls.from_arrays(d["A"], d["b"], d["c"])
        if "q" in d and int(d["q"]) != t.q:
            raise ValueError(f"q field {d['q']} does not match coefficient shapes ({t.q})")
        return t


def euler_tableau() -> ButcherTableau:
    return ButcherTableau.from_arrays([[0.0]], [1.0], [0.0])


def rk4_tableau() -> ButcherTableau:
    A = [[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]]
    return ButcherTableau.from_arrays(A, [1 / 6, 1 / 3, 1 / 3, 1 / 6], [0, 0.5, 0.5, 1])


def classical_tableau(q: int) -> ButcherTableau:
    """Euler, Heun, Kutta's third-order method or RK4 for ``q`` = 1..4."""
    if q == 1:
        return euler_tableau()
    if q == 2:
        return ButcherTableau.from_arrays([[0, 0], [1, 0]], [0.5, 0.5], [0, 1])
    if q == 3:
        return ButcherTableau.from_arrays(
            [[0, 0, 0], [0.5, 0, 0], [-1, 2, 0]], [1 / 6, 2 / 3, 1 / 6], [0, 0.5, 1]
        )
    if q == 4:
        return rk4_tableau()
    raise ValueError("classical schemes are provided for 1 <= q <= 4")


def composed_tableau(parts: Sequence[ButcherTableau]) -> ButcherTableau:
    """One step of size h made of ``len(parts)`` equal substeps, one per part."""
    w = 1.0 / len(parts)
    q = sum(p.q for p in parts)
    A = np.zeros((q, q))
    b = np.zeros(q)
    off = 0
    for p in parts:
        n = p.q
        A[off : off + n, :off] = b[:off][None, :]
        A[off : off + n, off : off + n] = w * p.A_array
        b[off : off + n] = w * p.b_array
        off += n
    return ButcherTableau.from_arrays(A, b)


def warm_start_tableau(q: int) -> ButcherTableau:
    """Classical scheme with ``q`` stages.

    For ``q <= 4`` this is Euler/Heun/RK3/RK4.  Larger ``q`` composes
    ``ceil(q/4)`` classical substeps whose stage counts differ by at most one,
    e.g. RK4+RK4+RK3 for ``q = 11``.
    """
    if q < 1:
        raise ValueError("q must be positive")
    if q <= 4:
        return classical_tableau(q)
    m = -(-q // 4)
    sizes = [q // m + (1 if k < q % m else 0) for k in range(m)]
    return composed_tableau([classical_tableau(n) for n in sizes])


def random_tableau(q: int, rng: np.random.Generator, eps: float = DEFAULT_EPS) -> ButcherTableau:
    """A and b drawn uniform in [0, 2/q], then projected onto the constraint set."""
    A = np.tril(rng.uniform(0.0, 2.0 / q, size=(q, q)), k=-1)
    b = rng.uniform(0.0, 2.0 / q, size=q)
    return project_constraints(ButcherTableau.from_arrays(A, b), eps)


def validate_tableau(t: ButcherTableau, tol: float = 1e-12) -> list[str]:
    """Human-readable list of constraint violations (empty when valid).

    Checked: strictly lower-triangular A, row sums equal to c, ``c_1 >= 0``,
    ``0 < c_i <= 1`` for later stages, and ``sum(b) == 1``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, b, c = t.A_array, t.b_array, t.c_array
    problems = []
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        problems.append("non-finite coefficients")
        return problems
    upper = np.abs(np.triu(A))
    if upper.max() > tol:
        i, j = np.unravel_index(np.argmax(upper), upper.shape)
        problems.append(f"explicitness: a[{i + 1},{j + 1}] = {A[i, j]:.6g} is on or above the diagonal")
    rows = A.sum(axis=1)
    for i in range(t.q):
        if abs(rows[i] - c[i]) > tol:
            problems.append(f"row sum: sum_j a[{i + 1},j] = {rows[i]:.6g} but c[{i + 1}] = {c[i]:.6g}")
    if c[0] < -tol:
        problems.append(f"stage time: c[1] = {c[0]:.6g} is negative")
    for i in range(1, t.q):
        if not (-tol < c[i] < 1.0 + tol):
            problems.append(f"stage time: c[{i + 1}] = {c[i]:.6g} outside (0, 1]")
    if abs(b.sum() - 1.0) > tol:
        problems.append(f"consistency: sum(b) = {b.sum():.12g} != 1")
    return problems


def project_constraints(t: ButcherTableau, eps: float = DEFAULT_EPS) -> ButcherTableau:
    """Restore the Runge-Kutta constraints exactly after a gradient step.

    * entries on and above the diagonal are zeroed;
    * ``b`` is divided by its sum;
    * row ``i >= 2`` keeps ``c_i = sum_j a_ij`` when that lies in ``[eps, 1]``
      and otherwise gets ``c_i = clip(sum_j a_ij, eps, 1 - eps)``.  A positive row is
      rescaled by ``c_i / sum``; a non-positive row has the deficit added to
      its sub-diagonal entry, so an all-zero row becomes ``a_{i,i-1} = eps``.

    Valid tableaux are returned unchanged.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    A = np.tril(t.A_array, k=-1)
    b = t.b_array
    total = b.sum()
    if total == 0.0 or not np.isfinite(total):
        raise DegenerateSchemeError("sum of weights is zero; cannot normalise b")
    if abs(total - 1.0) > _ROUND:
        b = b / total
    c = np.zeros(t.q)
    for i in range(1, t.q):
        s = A[i].sum()
        # in-range sums (including c_i = 1 as in RK4) are kept; others clamp to [eps, 1-eps]
        ci = s if eps - _ROUND <= s <= 1.0 + _ROUND else min(max(s, eps), 1.0 - eps)
        if s > 0.0:
            if ci != s:
                A[i] *= ci / s
        else:
            A[i, i - 1] += ci - s
        # keep c bit-identical to the row sum actually stored
        c[i] = A[i].sum() if ci != s else ci
    return ButcherTableau.from_arrays(A, b, c)


BUILTIN_NAMES = ("euler", "rk4", "adrk_h1", "adrk_h2", "adrk_h3")


def builtin_tableau(name: str) -> ButcherTableau:
    """Classical schemes and the transcribed 11-stage identification tableaux."""
    if name == "euler":
        return euler_tableau()
    if name == "rk4":
        return rk4_tableau()
    if name in ("adrk_h1", "adrk_h2", "adrk_h3"):
        text = resources.files("adrk.data").joinpath(f"{name}.json").read_text()
        return ButcherTableau.from_dict(json.loads(text))
    raise KeyError(f"unknown builtin tableau {name!r}; choose from {BUILTIN_NAMES}")


def load_tableau(path) -> ButcherTableau:
    """Load a tableau JSON file ``{q, A, b, c}`` or a builtin name."""
    p = Path(path)
    if not p.exists() and str(path) in BUILTIN_NAMES:
        return builtin_tableau(str(path))
    return ButcherTableau.from_dict(json.loads(p.read_text()))


def save_tableau(t: ButcherTableau, path) -> None:
    Path(path).write_text(json.dumps(t.to_dict(), indent=2))
