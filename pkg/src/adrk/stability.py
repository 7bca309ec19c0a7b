"""Linear stability analysis of explicit Runge-Kutta schemes.

On the test equation ``z' = lam z`` one step multiplies the state by the
stability function ``R(lam h)``, a polynomial of degree at most ``q`` with
coefficients ``alpha_k = b^T A^(k-1) 1``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .integrate import rk_step
from .models import LinearScalarOde
from .tableau import ButcherTableau

__all__ = [
    "StabilityPolynomial",
    "StabilityRegionGrid",
    "stability_value_analytic",
    "stability_value_empirical",
    "stability_poly_coeffs",
    "poly_coeffs_generic",
    "horner",
    "estimate_order",
    "region_scan",
    "axis_stability_limit",
    "truncation_error_linear",
    "normalized_coeff_error",
    "DEFAULT_ORDER_TOL",
]

DEFAULT_ORDER_TOL = 0.01


@dataclass(frozen=True)
class StabilityPolynomial:
    """Coefficients ``alpha_0..alpha_q`` of ``R(z) = sum_k alpha_k z^k``."""

    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ValueError("a polynomial needs at least alpha_0")
        object.__setattr__(self, "coeffs", tuple(self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, k: int):
        return self.coeffs[k]

    def __call__(self, z):
        return horner(self.coeffs, z)

    def to_json(self) -> str:
        return json.dumps([_jsonable(a) for a in self.coeffs])

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "StabilityPolynomial":
        raw = json.loads(Path(path).read_text())
        return cls(tuple(complex(a[0], a[1]) if isinstance(a, list) else float(a) for a in raw))


def _jsonable(a):
    a = complex(a)
    return a.real if a.imag == 0.0 else [a.real, a.imag]


def horner(coeffs, z):
    """Evaluate ``sum_k coeffs[k] z^k``; works on numbers, arrays and tape types."""
    acc = coeffs[-1]
    for a in reversed(coeffs[:-1]):
        acc = acc * z + a
    return acc


def _resolvent_sum(A: np.ndarray, b: np.ndarray, z):
    """``1 + z b^T sum_{k<q} (zA)^k 1`` evaluated for a scalar or array ``z``."""
    z = np.asarray(z, dtype=complex)
    q = b.shape[0]
    v = np.ones((q,) + z.shape, dtype=complex)
    acc = v.copy()
    for _ in range(q - 1):
        v = z * np.tensordot(A, v, axes=1)
        acc = acc + v
    return 1.0 + z * np.tensordot(b, acc, axes=1)


def stability_value_analytic(t: ButcherTableau, z) -> complex:
    """``R(z) = 1 + z b^T (I - zA)^{-1} 1`` via the finite Neumann series."""
    return complex(_resolvent_sum(t.A_array, t.b_array, z))


def stability_value_empirical(t: ButcherTableau, z) -> complex:
    """Ratio ``z_{n+1}/z_n``: one RK step of ``z' = lam z`` with ``lam h = z`` from state 1."""
    return complex(rk_step(t, LinearScalarOde(complex(z)), 0.0, [1.0 + 0.0j], 1.0)[0])


def stability_poly_coeffs(t: ButcherTableau) -> StabilityPolynomial:
    A, b = t.A_array, t.b_array
    coeffs = [1.0]
    v = np.ones(t.q)
    for _ in range(t.q):
        coeffs.append(float(b @ v))
        v = A @ v
    return StabilityPolynomial(tuple(coeffs))


def poly_coeffs_generic(A, b) -> list:
    """``[1, b^T 1, b^T A 1, ...]`` for nested lists of floats or tape Vars.

    Only the strictly lower triangle of ``A`` is read.
    """
    q = len(b)
    v = [1.0] * q
    coeffs = [1.0]
    for k in range(q):
        coeffs.append(_dot(b, v))
        if k < q - 1:
            v = [_dot(A[i][:i], v[:i]) if i else 0.0 for i in range(q)]
    return coeffs


def _dot(xs, ys):
    acc = None
    for x, y in zip(xs, ys):
        if _zero(x) or _zero(y):
            continue
        term = x * y
        acc = term if acc is None else acc + term
    return 0.0 if acc is None else acc


def _zero(x) -> bool:
    return type(x) in (float, int) and x == 0


def estimate_order(p: StabilityPolynomial, tol: float = DEFAULT_ORDER_TOL) -> int:
    """Largest ``p <= degree`` with ``|alpha_k - 1/k!| <= tol`` for all ``1 <= k <= p``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    order = 0
    for k in range(1, p.degree + 1):
        if abs(p.coeffs[k] - 1.0 / math.factorial(k)) > tol:
            break
        order = k
    return order


@dataclass(frozen=True)
class StabilityRegionGrid:
    """``mask[i, j]`` is ``|R(re[i] + 1j*im[j])| <= 1``."""

    re: np.ndarray
    im: np.ndarray
    mask: np.ndarray
    tableau: ButcherTableau

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re", "im", "stable"])
            for i, x in enumerate(self.re):
                for j, y in enumerate(self.im):
                    w.writerow([format(float(x), ".17g"), format(float(y), ".17g"), int(self.mask[i, j])])


def region_scan(t: ButcherTableau, re_range, im_range, resolution) -> StabilityRegionGrid:
    """Evaluate the stability predicate on a rectangular grid.

    ``resolution`` is the number of points per axis, either one int or a pair
    ``(n_re, n_im)``; both range endpoints are included.
    """
    n_re, n_im = (resolution, resolution) if np.isscalar(resolution) else resolution
    if n_re < 1 or n_im < 1:
        raise ValueError("resolution must be positive")
    re = np.linspace(re_range[0], re_range[1], int(n_re))
    im = np.linspace(im_range[0], im_range[1], int(n_im))
    Z = re[:, None] + 1j * im[None, :]
    mask = np.abs(_resolvent_sum(t.A_array, t.b_array, Z)) <= 1.0
    return StabilityRegionGrid(re, im, mask, t)


def axis_stability_limit(
    t: ButcherTableau, axis: str = "real", tol: float = 1e-3, max_extent: float | None = None
) -> float:
    """Largest ``r`` with ``|R(z)| <= 1 + tol`` along the axis segment of length ``r``.

    The segment runs from 0 towards ``-r`` (real) or ``+i r`` (imaginary).  A
    coarse scan with spacing ``10 tol`` brackets the first violation, then
    bisection refines it down to ``tol``.  ``max_extent`` caps the scan and
    defaults to just beyond the first-order bound for the axis.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if axis == "real":
        direction = -1.0 + 0j
        bound = 2.0 * t.q**2
    elif axis in ("imag", "imaginary"):
        direction = 1j
        bound = float(max(t.q - 1, 1))
    else:
        raise ValueError("axis must be 'real' or 'imaginary'")
    if max_extent is None:
        max_extent = 1.1 * bound + 1.0
    A, b = t.A_array, t.b_array

    def ok(r):
        return np.abs(_resolvent_sum(A, b, r * direction)) <= 1.0 + tol

    step = 10.0 * tol
    rs = np.arange(0.0, max_extent + step, step)
    good = ok(rs)
    bad = np.flatnonzero(~good)
    if bad.size == 0:
        return float(rs[-1])
    first = bad[0]
    if first == 0:
        return 0.0
    lo, hi = float(rs[first - 1]), float(rs[first])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def truncation_error_linear(p: int, lambda_h: float, z: float = 1.0) -> float:
    """Leading local error ``|(lam h)^(p+1) / (p+1)!| |z|`` of an order-``p`` scheme."""
    if p < 1:
        raise ValueError("order must be at least 1")
    return abs(lambda_h) ** (p + 1) / math.factorial(p + 1) * abs(z)


def normalized_coeff_error(p: StabilityPolynomial, up_to: int) -> float:
    """``sum_{k=1}^{up_to} |alpha_k - 1/k!| k!``; coefficients past the degree count as zero."""
    if up_to < 0:
        raise ValueError("up_to must be non-negative")
    alpha = list(p.coeffs) + [0.0] * max(0, up_to - p.degree)
    return float(sum(abs(alpha[k] - 1.0 / math.factorial(k)) * math.factorial(k) for k in range(1, up_to + 1)))
