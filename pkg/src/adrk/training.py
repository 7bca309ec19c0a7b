"""Gradient-based training of Runge-Kutta tableaux (and optionally an LQM).

Three objectives are provided:

* :func:`loss_stability`: hinge penalty on ``|R(h lam)| > 1`` over a grid of
  step sizes, used to design schemes with a prescribed stability interval;
* :func:`loss_trajectory`: one-step-ahead prediction error of a scheme on a
  sampled trajectory of a known model;
* :func:`loss_joint`: the same error with a trainable linear-quadratic model.

Every iteration records a fresh tape, backpropagates, takes a plain SGD step
per parameter group and projects the tableau back onto the Runge-Kutta
constraint set.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .autodiff import ComplexPair, Tape, Var, maximum, sqrt, value_of
from .integrate import StepCoefficients, Trajectory, rk_step
from .models import LinearScalarOde, LqmModel, LqmParams
from .stability import horner, poly_coeffs_generic
from .tableau import (
    DEFAULT_EPS,
    ButcherTableau,
    project_constraints,
    random_tableau,
    warm_start_tableau,
)

__all__ = [
    "TrainConfig",
    "TrainRun",
    "TrainingDivergedError",
    "PlateauDecay",
    "TableauVars",
    "loss_stability",
    "loss_trajectory",
    "loss_joint",
    "sgd_step",
    "clip_gradient",
    "tableau_to_flat",
    "tableau_from_flat",
    "stability_grid",
    "stability_config",
    "train_stability",
    "train_ode_adapted",
    "train_joint",
    "WhitenedLqmBasis",
]


class TrainingDivergedError(ArithmeticError):
    """A gradient or loss became non-finite."""

    def __init__(self, iteration: int, what: str = "gradient"):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration


@dataclass
class TrainConfig:
    """Hyperparameters shared by all training modes.

    Parameters
    ----------
    lr_rk, lr_nn
        SGD rates for the tableau and the model parameters.
    iterations
        Iteration budget (for stability training: summed over all grid stages).
    batch_size
        Windows drawn per iteration for trajectory losses; 0 means full batch.
    seed
        Seeds initialisation and mini-batch selection.
    eps
        Lower clamp for stage times in the projection.
    decay, patience, plateau_smoothing, plateau_rel_tol
        Both rates are multiplied by ``decay`` once the exponentially smoothed
        loss has not improved by a relative ``plateau_rel_tol`` for
        ``patience`` iterations.
    grid_divisions
        Stability mode: successive grids use spacing ``h_f / d`` for each ``d``.
    warm_start
        Start from the classical scheme with ``q`` stages instead of a random
        tableau.
    literal_hinge
        Stability mode: hinge the summed excess, ``max(0, sum(|R| - 1))``,
        instead of summing per-point hinges.
    lqm_basis
        Joint mode: ``"whitened"`` trains the LQM in decorrelated monomial
        coordinates, ``"dense"`` trains the dense coefficients directly.
    grad_clip
        If set, each group's gradient is rescaled to at most this Euclidean
        norm before the update.  Off by default.
    checkpoint_every, checkpoint_dir
        Write tableau/LQM JSON snapshots every ``k`` iterations (0 disables).
    """

    lr_rk: float = 1e-3
    lr_nn: float = 1e-3
    iterations: int = 1000
    batch_size: int = 32
    seed: int = 0
    eps: float = DEFAULT_EPS
    decay: float = 0.5
    patience: int = 200
    plateau_smoothing: float = 0.98
    plateau_rel_tol: float = 1e-3
    grid_divisions: tuple = (10, 20, 50, 100)
    warm_start: bool = True
    literal_hinge: bool = False
    lqm_basis: str = "whitened"
    grad_clip: float | None = None
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        self.grid_divisions = tuple(int(d) for d in self.grid_divisions)
        if self.lr_rk <= 0 or self.lr_nn <= 0:
            raise ValueError("learning rates must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.batch_size < 0:
            raise ValueError("batch_size must be non-negative")
        if not 0.0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 0.5)")
        if not 0.0 < self.decay <= 1.0 or self.patience < 1:
            raise ValueError("need 0 < decay <= 1 and patience >= 1")
        if not 0.0 <= self.plateau_smoothing < 1.0:
            raise ValueError("plateau_smoothing must lie in [0, 1)")
        if not self.grid_divisions or min(self.grid_divisions) < 1:
            raise ValueError("grid_divisions must be positive integers")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ValueError("grad_clip must be positive")
        if self.lqm_basis not in ("whitened", "dense"):
            raise ValueError("lqm_basis must be 'whitened' or 'dense'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid_divisions"] = list(self.grid_divisions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def stability_config(**overrides) -> TrainConfig:
    """Defaults for stability design: larger rate with gradient clipping.

    Far outside the stability region ``|R|`` grows like ``|h lam|^q``, so raw
    gradients span many orders of magnitude; the clipped step keeps the
    early iterations bounded.
    """
    base = {"lr_rk": 1e-2, "grad_clip": 1.0, "iterations": 50000}
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class TrainRun:
    """Configuration and trace of one optimisation."""

    mode: str
    config: TrainConfig
    initial_tableau: ButcherTableau
    final_tableau: ButcherTableau | None = None
    initial_lqm: LqmParams | None = None
    final_lqm: LqmParams | None = None
    loss_history: list = field(default_factory=list)
    projection_events: list = field(default_factory=list)
    lr_events: list = field(default_factory=list)
    stage_events: list = field(default_factory=list)
    converged: bool = False
    wall_clock: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.loss_history)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "config": self.config.to_dict(),
            "converged": self.converged,
            "iterations": self.iterations,
            "wall_clock": self.wall_clock,
            "initial_tableau": self.initial_tableau.to_dict(),
            "final_tableau": None if self.final_tableau is None else self.final_tableau.to_dict(),
            "initial_lqm": None if self.initial_lqm is None else self.initial_lqm.to_dict(),
            "final_lqm": None if self.final_lqm is None else self.final_lqm.to_dict(),
            "loss_history": list(self.loss_history),
            "projection_events": self.projection_events,
            "lr_events": self.lr_events,
            "stage_events": self.stage_events,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


class PlateauDecay:
    """Multiplicative rate decay on a plateau of the smoothed loss."""

    def __init__(self, factor: float, patience: int, smoothing: float, rel_tol: float):
        self.factor = factor
        self.patience = patience
        self.smoothing = smoothing
        self.rel_tol = rel_tol
        self.reset()

    def reset(self) -> None:
        self.ema = None
        self.best = math.inf
        self.since = 0

    def update(self, loss: float) -> bool:
        """Feed one loss value; returns True when the rates should decay."""
        s = self.smoothing
        self.ema = loss if self.ema is None else s * self.ema + (1.0 - s) * loss
        if self.ema < self.best * (1.0 - self.rel_tol):
            self.best = self.ema
            self.since = 0
            return False
        self.since += 1
        if self.since >= self.patience:
            self.since = 0
            return True
        return False


# --- tableau parameters on the tape -------------------------------------------


def tableau_to_flat(t: ButcherTableau) -> list[float]:
    """Free coefficients: strictly-lower ``A`` row by row, then ``b``."""
    return [t.A[i][j] for i in range(t.q) for j in range(i)] + list(t.b)


def tableau_from_flat(values: Sequence[float], q: int, eps: float | None = None) -> ButcherTableau:
    """Inverse of :func:`tableau_to_flat`; projects when ``eps`` is given."""
    n_a = q * (q - 1) // 2
    if len(values) != n_a + q:
        raise ValueError(f"expected {n_a + q} values for q={q}, got {len(values)}")
    A = np.zeros((q, q))
    A[np.tril_indices(q, -1)] = values[:n_a]
    t = ButcherTableau.from_arrays(A, values[n_a:])
    return t if eps is None else project_constraints(t, eps)


class TableauVars:
    """Tableau whose free coefficients are inputs on a tape.

    Exposes ``A``, ``b`` and ``c`` like :class:`ButcherTableau`; entries on
    and above the diagonal are plain zeros and ``c`` is the float stage-time
    vector of the underlying tableau (the models trained here are autonomous).

    With ``normalize_weights`` the weights seen by the losses are
    ``b / sum(b)``.  On a valid tableau this leaves every value unchanged but
    makes the weight gradient orthogonal to ``b``, so that a gradient step
    followed by renormalisation is a descent step.
    """

    def __init__(self, tape: Tape, t: ButcherTableau, normalize_weights: bool = True):
        self._build(tape.inputs(tableau_to_flat(t)), t, normalize_weights)

    @classmethod
    def wrap(cls, values: Sequence, t: ButcherTableau, normalize_weights: bool = True) -> "TableauVars":
        """Use existing inputs (ordered as :func:`tableau_to_flat`) instead of recording new ones."""
        if len(values) != len(tableau_to_flat(t)):
            raise ValueError("wrong number of tableau parameters")
        obj = cls.__new__(cls)
        obj._build(list(values), t, normalize_weights)
        return obj

    def _build(self, values: list, t: ButcherTableau, normalize_weights: bool) -> None:
        q = t.q
        self.q = q
        self.vars = values
        it = iter(self.vars)
        self.A = [[next(it) if j < i else 0.0 for j in range(q)] for i in range(q)]
        raw = [next(it) for _ in range(q)]
        if normalize_weights:
            total = _sum(raw)
            raw = [w / total for w in raw]
        self.b = raw
        self.c = list(t.c)


# --- losses --------------------------------------------------------------------


def stability_grid(h_f: float, divisions: int) -> list[float]:
    """``h_f k / d`` for ``k = 1..d``."""
    return [h_f * k / divisions for k in range(1, divisions + 1)]


def _sum(terms):
    acc = None
    for x in terms:
        acc = x if acc is None else acc + x
    return 0.0 if acc is None else acc


def _empirical_value(tab, z: complex):
    if z.imag == 0.0:
        return rk_step(tab, LinearScalarOde(z.real), 0.0, [1.0], 1.0)[0]
    return rk_step(tab, LinearScalarOde(z), 0.0, [ComplexPair(1.0, 0.0)], 1.0)[0]


def loss_stability(tab, lam: complex, h_grid: Sequence[float], literal: bool = False, route: str = "auto"):
    """Hinge penalty ``sum_h max(0, |R(h lam)| - 1)``.

    ``route`` picks how ``R`` is evaluated: ``"analytic"`` from the stability
    polynomial, ``"empirical"`` from one RK step of ``z' = lam z``, or
    ``"auto"`` (analytic for real ``lam``, empirical otherwise).  With
    ``literal=True`` the hinge is applied once to the summed excess.
    """
    if len(h_grid) == 0:
        raise ValueError("the step grid must be nonempty")
    lam = complex(lam)
    if route == "auto":
        route = "analytic" if lam.imag == 0.0 else "empirical"
    if route not in ("analytic", "empirical"):
        raise ValueError("route must be 'analytic', 'empirical' or 'auto'")
    if route == "analytic":
        alpha = poly_coeffs_generic(tab.A, tab.b)
        values = []
        for h in h_grid:
            z = h * lam
            if z.imag == 0.0:
                values.append(horner(alpha, z.real))
            else:
                acc = ComplexPair.wrap(alpha[-1])
                for a in reversed(alpha[:-1]):
                    acc = acc * z + a
                values.append(acc)
    else:
        values = [_empirical_value(tab, h * lam) for h in h_grid]
    excess = [abs(v) - 1.0 for v in values]
    if literal:
        return maximum(0.0, _sum(excess))
    return _sum(maximum(0.0, e) for e in excess)


def _norm(vec):
    return sqrt(_sum(v * v for v in vec))


def loss_trajectory(tab, model, data: Trajectory, indices: Sequence[int] | None = None):
    """Sum over ``n`` of ``||z_n - Phi(z_{n-1})||_2``.

    ``indices`` selects the target states ``n`` (1-based into the data); all
    ``n = 1..N`` by default.
    """
    if len(data) < 2:
        raise ValueError("need at least two states")
    if indices is None:
        indices = range(1, len(data))
    coeffs = StepCoefficients(tab, data.h)
    states = data.states
    terms = []
    for n in indices:
        prev = states[n - 1].tolist()
        pred = coeffs.step(model, data.t0 + (n - 1) * data.h, prev)
        target = states[n]
        terms.append(_norm([float(target[m]) - pred[m] for m in range(len(prev))]))
    return _sum(terms)


def loss_joint(tab, params, data: Trajectory, indices: Sequence[int] | None = None):
    """:func:`loss_trajectory` with the right-hand side given by LQM parameters."""
    model = params.model() if isinstance(params, LqmParams) else params
    return loss_trajectory(tab, model, data, indices)


# --- optimiser -----------------------------------------------------------------


def clip_gradient(g: np.ndarray, limit: float | None) -> np.ndarray:
    """Rescale ``g`` to Euclidean norm ``limit`` if it is longer."""
    if limit is None:
        return g
    n = float(np.linalg.norm(g))
    return g * (limit / n) if n > limit else g


def sgd_step(
    params: dict,
    grads: dict,
    rates: dict,
    iteration: int = 0,
    q: int | None = None,
    eps: float = DEFAULT_EPS,
    grad_clip: float | None = None,
):
    """Plain gradient descent ``theta - mu * g`` per parameter group.

    The group named ``"rk"`` holds flat tableau coefficients (see
    :func:`tableau_to_flat`) and is projected onto the constraint set after
    the update, which requires ``q``.

    Raises
    ------
    TrainingDivergedError
        If any gradient is non-finite.
    """
    out = {}
    for name, theta in params.items():
        g = np.asarray(grads[name], dtype=float)
        if g.shape != np.shape(theta):
            raise ValueError(f"gradient shape mismatch in group {name!r}")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(iteration)
        g = clip_gradient(g, grad_clip)
        out[name] = (np.asarray(theta, dtype=float) - rates[name] * g).tolist()
    if "rk" in out:
        if q is None:
            raise ValueError("q is required to project the tableau group")
        out["rk"] = tableau_to_flat(tableau_from_flat(out["rk"], q, eps))
    return out


def _projection_event(iteration: int, raw: ButcherTableau, projected: ButcherTableau, eps: float):
    rows = raw.A_array.sum(axis=1)
    clipped = [i + 1 for i in range(1, raw.q) if not (eps <= rows[i] <= 1.0)]
    total = float(raw.b_array.sum())
    if not clipped and abs(total - 1.0) <= 1e-12:
        return None
    return {"iteration": iteration, "sum_b": total, "clipped_rows": clipped}


class _Loop:
    """Shared SGD bookkeeping: rates, plateau decay, history, checkpoints."""

    def __init__(self, run: TrainRun, cfg: TrainConfig):
        self.run = run
        self.cfg = cfg
        self.rates = {"rk": cfg.lr_rk, "nn": cfg.lr_nn}
        self.sched = PlateauDecay(cfg.decay, cfg.patience, cfg.plateau_smoothing, cfg.plateau_rel_tol)

    def record(self, it: int, loss: float) -> None:
        if not math.isfinite(loss):
            raise TrainingDivergedError(it, "loss")
        self.run.loss_history.append(loss)
        if self.sched.update(loss):
            self.rates = {k: v * self.cfg.decay for k, v in self.rates.items()}
            self.run.lr_events.append({"iteration": it, "lr_rk": self.rates["rk"], "lr_nn": self.rates["nn"]})

    def step_tableau(self, it: int, t: ButcherTableau, grad: Sequence[float]) -> ButcherTableau:
        g = np.asarray(grad, dtype=float)
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(it)
        g = clip_gradient(g, self.cfg.grad_clip)
        theta = np.asarray(tableau_to_flat(t)) - self.rates["rk"] * g
        raw = tableau_from_flat(theta.tolist(), t.q)
        new = project_constraints(raw, self.cfg.eps)
        ev = _projection_event(it, raw, new, self.cfg.eps)
        if ev is not None:
            self.run.projection_events.append(ev)
        return new

    def checkpoint(self, it: int, t: ButcherTableau, lqm: LqmParams | None = None) -> None:
        k = self.cfg.checkpoint_every
        if not k or not self.cfg.checkpoint_dir or (it + 1) % k:
            return
        d = Path(self.cfg.checkpoint_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"tableau_{it + 1:06d}.json").write_text(json.dumps(t.to_dict()))
        if lqm is not None:
            lqm.save(d / f"lqm_{it + 1:06d}.json")


def _initial_tableau(q: int, cfg: TrainConfig, rng: np.random.Generator) -> ButcherTableau:
    if q < 1:
        raise ValueError("q must be positive")
    if cfg.warm_start:
        return warm_start_tableau(q)
    return random_tableau(q, rng, cfg.eps)


# --- stability-constrained design ---------------------------------------------


def train_stability(
    q: int, lam: complex, h_f: float, config: TrainConfig | None = None, route: str = "auto"
) -> tuple[TrainRun, ButcherTableau]:
    """Design a ``q``-stage scheme stable for ``h lam`` with ``h`` in ``(0, h_f]``.

    Training starts on the grid with spacing ``h_f / d`` for the first entry
    ``d`` of ``config.grid_divisions``.  Whenever the loss reaches zero the
    next (finer) grid is used; the run converges once the loss is zero on
    the finest grid.  Otherwise the lowest-loss tableau seen on the current
    grid is returned with ``converged=False``.
    """
    cfg = config or stability_config()
    if h_f <= 0:
        raise ValueError("h_f must be positive")
    rng = np.random.default_rng(cfg.seed)
    t = _initial_tableau(q, cfg, rng)
    run = TrainRun("stability", cfg, t)
    loop = _Loop(run, cfg)
    start = time.perf_counter()
    stage = 0
    grid = stability_grid(h_f, cfg.grid_divisions[0])
    run.stage_events.append({"iteration": 0, "divisions": cfg.grid_divisions[0]})
    best = (math.inf, t)
    for it in range(cfg.iterations):
        tape = Tape()
        tv = TableauVars(tape, t)
        loss = loss_stability(tv, lam, grid, cfg.literal_hinge, route)
        value = float(value_of(loss))
        loop.record(it, value)
        if value < best[0]:
            best = (value, t)
        if value == 0.0:
            if stage == len(cfg.grid_divisions) - 1:
                run.converged = True
                break
            stage += 1
            grid = stability_grid(h_f, cfg.grid_divisions[stage])
            run.stage_events.append({"iteration": it + 1, "divisions": cfg.grid_divisions[stage]})
            loop.sched.reset()
            best = (math.inf, t)
            continue
        grad = tape.gradient(loss, tv.vars)
        t = loop.step_tableau(it, t, grad)
        loop.checkpoint(it, t)
    if not run.converged and cfg.iterations > 0:
        # the budget may end right after a step; score the last iterate too
        final_loss = float(value_of(loss_stability(t, lam, grid, cfg.literal_hinge, route)))
        if final_loss == 0.0 and stage == len(cfg.grid_divisions) - 1:
            run.converged = True
        elif final_loss < best[0]:
            best = (final_loss, t)
        if not run.converged:
            t = best[1]
    run.final_tableau = t
    run.wall_clock = time.perf_counter() - start
    return run, t


# --- trajectory training -------------------------------------------------------


def _batches(rng: np.random.Generator, n_windows: int, batch: int):
    if batch == 0 or batch >= n_windows:
        return None
    return (rng.choice(n_windows, size=batch, replace=False) + 1).tolist()


def train_ode_adapted(
    q: int, model, data: Trajectory, config: TrainConfig | None = None, init: ButcherTableau | None = None
) -> tuple[TrainRun, ButcherTableau]:
    """Fit a ``q``-stage tableau to one-step transitions of ``data`` under ``model``.

    Each iteration minimises the mean of the per-window prediction errors
    over a seeded random subset of windows.
    """
    cfg = config or TrainConfig()
    if len(data) < 2:
        raise ValueError("need at least two states")
    rng = np.random.default_rng(cfg.seed)
    t = init if init is not None else _initial_tableau(q, cfg, rng)
    if t.q != q:
        raise ValueError("initial tableau has the wrong number of stages")
    run = TrainRun("ode", cfg, t)
    loop = _Loop(run, cfg)
    start = time.perf_counter()
    n_windows = len(data) - 1
    for it in range(cfg.iterations):
        idx = _batches(rng, n_windows, cfg.batch_size)
        count = n_windows if idx is None else len(idx)
        tape = Tape()
        tv = TableauVars(tape, t)
        loss = loss_trajectory(tv, model, data, idx)
        value = float(value_of(loss)) / count
        loop.record(it, value)
        if type(loss) is not Var:
            continue  # loss independent of the tableau (e.g. exact data)
        grad = [g / count for g in tape.gradient(loss, tv.vars)]
        t = loop.step_tableau(it, t, grad)
        loop.checkpoint(it, t)
    run.final_tableau = t
    run.converged = True
    run.wall_clock = time.perf_counter() - start
    return run, t


class WhitenedLqmBasis:
    """Linear-quadratic model written in decorrelated monomial coordinates.

    With ``m(z)`` the vector of monomials ``z_j`` and ``z_j z_k`` (``j <= k``),
    the model is ``f(z) = w0 + W T (m(z) - mu)`` where ``mu`` and
    ``T = C^{-1/2}`` come from the monomial mean and covariance ``C`` over a
    reference set of states.  The map to dense LQM coefficients is linear,
    so SGD on ``(w0, W)`` is SGD on the same model class with a fixed
    preconditioner.
    """

    def __init__(self, states: np.ndarray, floor: float = 1e-12):
        states = np.asarray(states, dtype=float)
        self.s = s = states.shape[1]
        self.pairs = [(j, k) for j in range(s) for k in range(j, s)]
        M = self.monomials(states)
        self.mu = M.mean(axis=0)
        C = np.atleast_2d(np.cov(M, rowvar=False))
        w, V = np.linalg.eigh(C)
        w = np.maximum(w, floor * max(w.max(), floor))
        self.T = (V / np.sqrt(w)) @ V.T
        self.T_inv = (V * np.sqrt(w)) @ V.T
        self.n_features = M.shape[1]

    def monomials(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        quad = [states[:, j] * states[:, k] for j, k in self.pairs]
        return np.column_stack([states] + quad)

    @property
    def n_params(self) -> int:
        return self.s * (1 + self.n_features)

    def dense(self, theta: Sequence) -> tuple[list, list, list]:
        """Dense ``(bias, linear, quadratic)`` for flat ``theta = [w0, W row-major]``.

        Entries may be tape Vars; the quadratic tensor uses the upper
        triangle ``j <= k`` only.
        """
        s, nf = self.s, self.n_features
        w0 = list(theta[:s])
        W = [list(theta[s + i * nf : s + (i + 1) * nf]) for i in range(s)]
        T, mu = self.T.tolist(), self.mu.tolist()
        G = [[_sum(W[i][l] * T[l][m] for l in range(nf)) for m in range(nf)] for i in range(s)]
        bias = [w0[i] - _sum(G[i][m] * mu[m] for m in range(nf)) for i in range(s)]
        linear = [[G[i][j] for j in range(s)] for i in range(s)]
        quad = [[[0.0] * s for _ in range(s)] for _ in range(s)]
        for i in range(s):
            for p, (j, k) in enumerate(self.pairs):
                quad[i][j][k] = G[i][s + p]
        return bias, linear, quad

    def to_params(self, theta: Sequence[float]) -> LqmParams:
        return LqmParams.from_arrays(*self.dense([float(x) for x in theta]))

    def from_params(self, p: LqmParams) -> list[float]:
        b, L, Q = p.arrays()
        s = self.s
        G = np.zeros((s, self.n_features))
        G[:, :s] = L
        for idx, (j, k) in enumerate(self.pairs):
            G[:, s + idx] = Q[:, j, k] + (Q[:, k, j] if j != k else 0.0)
        W = G @ self.T_inv
        w0 = b + G @ self.mu
        return np.concatenate([w0, W.ravel()]).tolist()


def train_joint(
    q: int,
    s: int,
    data: Trajectory,
    config: TrainConfig | None = None,
    init_tableau: ButcherTableau | None = None,
    init_lqm: LqmParams | None = None,
) -> tuple[TrainRun, ButcherTableau, LqmParams]:
    """Fit a ``q``-stage tableau and an ``s``-dimensional LQM together.

    The LQM starts at zero unless ``init_lqm`` is given.  Rates ``lr_rk`` and
    ``lr_nn`` apply to the tableau and model groups respectively; the batch
    objective is the mean window error.
    """
    cfg = config or TrainConfig()
    if len(data) < 2:
        raise ValueError("need at least two states")
    if data.dim != s:
        raise ValueError(f"data has dimension {data.dim}, expected {s}")
    rng = np.random.default_rng(cfg.seed)
    t = init_tableau if init_tableau is not None else _initial_tableau(q, cfg, rng)
    p0 = init_lqm if init_lqm is not None else LqmParams.zeros(s)
    run = TrainRun("joint", cfg, t, initial_lqm=p0)
    loop = _Loop(run, cfg)
    start = time.perf_counter()
    if cfg.lqm_basis == "whitened":
        basis = WhitenedLqmBasis(data.states[:-1])
        theta = basis.from_params(p0)
        to_dense = basis.dense
        to_params = basis.to_params
    else:
        theta = p0.flat()

        def to_dense(th):
            n = s + s * s
            L = [list(th[s + i * s : s + (i + 1) * s]) for i in range(s)]
            Q = [[list(th[n + (i * s + j) * s : n + (i * s + j + 1) * s]) for j in range(s)] for i in range(s)]
            return list(th[:s]), L, Q

        def to_params(th):
            return LqmParams.from_flat(th, s)

    n_windows = len(data) - 1
    for it in range(cfg.iterations):
        idx = _batches(rng, n_windows, cfg.batch_size)
        count = n_windows if idx is None else len(idx)
        tape = Tape()
        tv = TableauVars(tape, t)
        th = tape.inputs(theta)
        bias, lin, quad = to_dense(th)
        loss = loss_trajectory(tv, LqmModel(bias, lin, quad), data, idx)
        value = float(value_of(loss)) / count
        loop.record(it, value)
        grads = tape.gradient(loss, tv.vars + th)
        n_rk = len(tv.vars)
        g_rk = [g / count for g in grads[:n_rk]]
        g_nn = np.asarray(grads[n_rk:]) / count
        if not np.all(np.isfinite(g_nn)):
            raise TrainingDivergedError(it)
        t = loop.step_tableau(it, t, g_rk)
        theta = (np.asarray(theta) - loop.rates["nn"] * clip_gradient(g_nn, cfg.grad_clip)).tolist()
        if loop.cfg.checkpoint_every:
            loop.checkpoint(it, t, to_params(theta))
    run.final_tableau = t
    run.final_lqm = to_params(theta)
    run.converged = True
    run.wall_clock = time.perf_counter() - start
    return run, t, run.final_lqm
