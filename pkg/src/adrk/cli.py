"""Command-line interface: ``adrk <command> [options]``.

Every option can also be supplied through ``--config file.json`` using the
option's long name with dashes replaced by underscores; flags given on the
command line take precedence over the file.

Exit codes: 0 success, 1 usage or input error, 2 training did not converge
(best-effort outputs are still written), 3 reference solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .chaos import ChaosThresholds, classify
from .integrate import Trajectory
from .models import LinearScalarOde, Lorenz63, Lorenz96, ZeroOde
from .reference import SolverError, reference_trajectory
from .stability import (
    axis_stability_limit,
    estimate_order,
    normalized_coeff_error,
    region_scan,
    stability_poly_coeffs,
)
from .tableau import BUILTIN_NAMES, load_tableau, save_tableau, validate_tableau
from .training import TrainConfig, TrainingDivergedError, train_joint, train_ode_adapted, train_stability

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNCONVERGED = 2
EXIT_SOLVER = 3

SYSTEMS = ("linear", "lorenz63", "lorenz96", "zero")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# defaults live here rather than in argparse so a config file can sit between them and the flags
DEFAULTS = {
    "common": {"seed": 0},
    "train": {
        "lr_rk": 1e-3,
        "lr_nn": 1e-3,
        "batch_size": 32,
        "eps": 1e-4,
        "decay": 0.5,
        "patience": 200,
        "grad_clip": None,
        "random_init": False,
        "checkpoint_every": 0,
        "out_dir": ".",
    },
    "train-stability": {
        "stages": 4,
        "lambda": "-1",
        "axis": None,
        "hf": None,
        "iterations": 50000,
        "lr_rk": 1e-2,
        "grad_clip": 1.0,
        "divisions": "10,20,50,100",
        "literal_hinge": False,
        "route": "auto",
    },
    "train-ode": {
        "stages": 4,
        "system": "lorenz63",
        "iterations": 3000,
        "data": None,
    },
    "train-joint": {
        "stages": 11,
        "dim": 3,
        "iterations": 4000,
        "data": None,
        "lqm_basis": "whitened",
    },
    "analyze": {"tol": 1e-3, "order_tol": 0.01, "region": None, "re_range": "-40,2", "im_range": "-10,10",
                "resolution": 201, "poly_json": None},
    "integrate": {"system": "lorenz63", "h": 0.1, "steps": 5000, "z0": None, "out": "trajectory.csv"},
    "generate": {"system": "lorenz63", "h": 0.2, "samples": 4000, "z0": None, "spin_up": None, "rtol": 1e-9,
                 "atol": 1e-9, "out": "data.csv"},
    "system": {"lambda": "-2", "sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0, "forcing": 8.0, "dim": 40},
}


def _add_system_args(p):
    p.add_argument("--system", choices=SYSTEMS)
    p.add_argument("--lambda", dest="lambda", help="rate of the linear system, e.g. -2 or -1j")
    p.add_argument("--sigma", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--forcing", type=float)
    p.add_argument("--dim", type=int, help="state dimension (lorenz96)")


def _add_train_args(p):
    p.add_argument("--stages", type=int)
    p.add_argument("--lr-rk", type=float)
    p.add_argument("--lr-nn", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--grad-clip", type=float)
    p.add_argument("--random-init", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adrk", description="Trainable explicit Runge-Kutta schemes.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train-stability", help="design a scheme with a prescribed stability interval")
    _add_train_args(p)
    p.add_argument("--lambda", dest="lambda")
    p.add_argument("--axis", choices=("real", "imaginary"))
    p.add_argument("--hf", type=float, help="largest step; default 2q^2/|lambda| (real) or (q-1)/|lambda|")
    p.add_argument("--divisions", help="comma-separated grid refinement schedule")
    p.add_argument("--literal-hinge", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--route", choices=("auto", "analytic", "empirical"))
    p.add_argument("--config")

    p = sub.add_parser("train-ode", help="fit a scheme to trajectory data of a known system")
    _add_train_args(p)
    _add_system_args(p)
    p.add_argument("--data", help="trajectory CSV")
    p.add_argument("--config")

    p = sub.add_parser("train-joint", help="fit a scheme and a linear-quadratic model together")
    _add_train_args(p)
    p.add_argument("--dim", type=int)
    p.add_argument("--data")
    p.add_argument("--lqm-basis", choices=("whitened", "dense"))
    p.add_argument("--config")

    p = sub.add_parser("analyze", help="stability and order analysis of a tableau")
    p.add_argument("tableau", help=f"tableau JSON or builtin name ({', '.join(BUILTIN_NAMES)})")
    p.add_argument("--tol", type=float, help="validation tolerance")
    p.add_argument("--order-tol", type=float)
    p.add_argument("--region", help="write the region scan CSV here")
    p.add_argument("--re-range")
    p.add_argument("--im-range")
    p.add_argument("--resolution", type=int)
    p.add_argument("--poly-json", help="write the stability polynomial JSON here")
    p.add_argument("--config")

    p = sub.add_parser("integrate", help="fixed-step simulation and chaos classification")
    p.add_argument("tableau")
    _add_system_args(p)
    p.add_argument("--h", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--z0", help="comma-separated initial state")
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("generate", help="reference trajectory from the adaptive solver")
    _add_system_args(p)
    p.add_argument("--h", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--z0")
    p.add_argument("--spin-up", type=float)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--out")
    p.add_argument("--config")
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """Merge builtin defaults < config file < explicit flags."""
    cmd = args.command
    merged = dict(DEFAULTS["common"])
    if cmd.startswith("train"):
        merged.update(DEFAULTS["train"])
    if cmd in ("train-ode", "integrate", "generate"):
        merged.update(DEFAULTS["system"])
    merged.update(DEFAULTS[cmd])
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            file_vals = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot read config {cfg_path}: {err}") from err
        if not isinstance(file_vals, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(file_vals) - set(merged) - {"tableau"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_vals)
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command"):
            merged[k] = v
    merged["command"] = cmd
    return merged


def _complex(text) -> complex:
    s = str(text).strip().replace("i", "j").replace(" ", "")
    if s in ("j", "+j"):
        return 1j
    if s == "-j":
        return -1j
    try:
        return complex(s)
    except ValueError as err:
        raise UsageError(f"cannot parse {text!r} as a number") from err


def _floats(text, n: int | None = None) -> list[float]:
    if isinstance(text, (list, tuple)):
        vals = [float(x) for x in text]
    else:
        try:
            vals = [float(x) for x in str(text).split(",")]
        except ValueError as err:
            raise UsageError(f"cannot parse {text!r} as comma-separated numbers") from err
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} comma-separated values, got {len(vals)}")
    return vals


def _model(o: dict):
    name = o["system"]
    if name == "linear":
        return LinearScalarOde(_complex(o["lambda"]))
    if name == "lorenz63":
        return Lorenz63(o["sigma"], o["rho"], o["beta"])
    if name == "lorenz96":
        if o["dim"] < 4:
            raise UsageError("lorenz96 needs --dim >= 4")
        return Lorenz96(o["forcing"], o["dim"])
    if name == "zero":
        return ZeroOde(o.get("dim", 1) if o.get("dim") else 1)
    raise UsageError(f"unknown system {name!r}")


def _default_z0(o: dict, model) -> list[float]:
    if o.get("z0"):
        return _floats(o["z0"], model.dim)
    if o["system"] == "lorenz96":
        z = [o["forcing"]] * model.dim
        z[0] += 0.01
        return z
    return [1.0] * model.dim


def _train_config(o: dict, **extra) -> TrainConfig:
    try:
        return TrainConfig(
            lr_rk=o["lr_rk"],
            lr_nn=o["lr_nn"],
            iterations=o["iterations"],
            batch_size=o["batch_size"],
            seed=o["seed"],
            eps=o["eps"],
            decay=o["decay"],
            patience=o["patience"],
            warm_start=not o["random_init"],
            grad_clip=o["grad_clip"],
            checkpoint_every=o["checkpoint_every"],
            checkpoint_dir=str(Path(o["out_dir"]) / "checkpoints") if o["checkpoint_every"] else None,
            **extra,
        )
    except (TypeError, ValueError) as err:
        raise UsageError(f"invalid training configuration: {err}") from err


def _load_data(path) -> Trajectory:
    if not path:
        raise UsageError("--data is required")
    try:
        return Trajectory.from_csv(path)
    except (OSError, ValueError) as err:
        raise UsageError(f"cannot load trajectory {path}: {err}") from err


def _out_dir(o: dict) -> Path:
    d = Path(o["out_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_train_stability(o: dict) -> int:
    q = int(o["stages"])
    lam = _complex(o["lambda"])
    axis = o["axis"] or ("real" if lam.imag == 0 else "imaginary")
    if axis == "imaginary" and lam.imag == 0:
        lam = complex(0.0, -abs(lam))
    if axis == "real" and lam.real >= 0 or lam == 0:
        raise UsageError("real-axis training needs a negative real lambda")
    if q < 1:
        raise UsageError("--stages must be positive")
    hf = o["hf"]
    if hf is None:
        hf = (2.0 * q * q if axis == "real" else max(q - 1, 1)) / abs(lam)
    divisions = tuple(int(x) for x in _floats(o["divisions"]))
    cfg = _train_config(o, grid_divisions=divisions, literal_hinge=bool(o["literal_hinge"]))
    run, tab = train_stability(q, lam, float(hf), cfg, route=o["route"])
    out = _out_dir(o)
    save_tableau(tab, out / "tableau.json")
    run.save(out / "run.json")
    limit = axis_stability_limit(tab, axis)
    print(f"converged: {run.converged} after {run.iterations} iterations")
    print(f"{axis}-axis stability limit (lambda h): {limit:.6g}  target {hf * abs(lam):.6g}")
    print(f"order: {estimate_order(stability_poly_coeffs(tab))}")
    return EXIT_OK if run.converged else EXIT_UNCONVERGED


def cmd_train_ode(o: dict) -> int:
    data = _load_data(o["data"])
    model = _model(o)
    if data.dim != model.dim:
        raise UsageError(f"data has {data.dim} components but {o['system']} has {model.dim}")
    cfg = _train_config(o)
    run, tab = train_ode_adapted(int(o["stages"]), model, data, cfg)
    out = _out_dir(o)
    save_tableau(tab, out / "tableau.json")
    run.save(out / "run.json")
    p = stability_poly_coeffs(tab)
    print(f"final loss {run.loss_history[-1] if run.loss_history else float('nan'):.6g}")
    print("alpha: " + " ".join(f"{a:.5g}" for a in p.coeffs))
    return EXIT_OK if run.converged else EXIT_UNCONVERGED


def cmd_train_joint(o: dict) -> int:
    data = _load_data(o["data"])
    s = int(o["dim"])
    if data.dim != s:
        raise UsageError(f"data has {data.dim} components, --dim is {s}")
    cfg = _train_config(o, lqm_basis=o["lqm_basis"])
    run, tab, lqm = train_joint(int(o["stages"]), s, data, cfg)
    out = _out_dir(o)
    save_tableau(tab, out / "tableau.json")
    lqm.save(out / "lqm.json")
    run.save(out / "run.json")
    p = stability_poly_coeffs(tab)
    print(f"final loss {run.loss_history[-1] if run.loss_history else float('nan'):.6g}")
    print("alpha: " + " ".join(f"{a:.5g}" for a in p.coeffs))
    return EXIT_OK if run.converged else EXIT_UNCONVERGED


def cmd_analyze(o: dict) -> int:
    try:
        tab = load_tableau(o["tableau"])
    except (OSError, ValueError, KeyError) as err:
        raise UsageError(f"cannot load tableau {o['tableau']}: {err}") from err
    problems = validate_tableau(tab, o["tol"])
    if problems:
        print("invalid tableau:")
        for msg in problems:
            print(f"  - {msg}")
        return EXIT_USAGE
    p = stability_poly_coeffs(tab)
    print(f"stages: {tab.q}")
    print("stability polynomial coefficients (alpha_0..alpha_q): " + ", ".join(f"{a:.5g}" for a in p.coeffs))
    print(f"estimated order (tol {o['order_tol']:g}): {estimate_order(p, o['order_tol'])}")
    print(f"real-axis limit: {axis_stability_limit(tab, 'real'):.6g}")
    print(f"imaginary-axis limit: {axis_stability_limit(tab, 'imaginary'):.6g}")
    print("normalized cumulative coefficient error:")
    for k in range(1, p.degree + 1):
        print(f"  up to order {k}: {normalized_coeff_error(p, k):.6g}")
    if o["region"]:
        grid = region_scan(tab, _floats(o["re_range"], 2), _floats(o["im_range"], 2), int(o["resolution"]))
        grid.to_csv(o["region"])
        print(f"region scan written to {o['region']}")
    if o["poly_json"]:
        p.save(o["poly_json"])
    return EXIT_OK


def cmd_integrate(o: dict) -> int:
    try:
        tab = load_tableau(o["tableau"])
    except (OSError, ValueError, KeyError) as err:
        raise UsageError(f"cannot load tableau {o['tableau']}: {err}") from err
    model = _model(o)
    if isinstance(model, LinearScalarOde) and isinstance(model.lam, complex):
        raise UsageError("integrate supports real-valued systems only")
    h, n = float(o["h"]), int(o["steps"])
    if h <= 0 or n < 0:
        raise UsageError("need --h > 0 and --steps >= 0")
    z0 = _default_z0(o, model)
    result, traj = classify(tab, model, z0, h, n, ChaosThresholds())
    traj.to_csv(o["out"])
    print(f"classification: {result.summary()}")
    return EXIT_OK


def cmd_generate(o: dict) -> int:
    model = _model(o)
    h, n = float(o["h"]), int(o["samples"])
    if h <= 0 or n < 0:
        raise UsageError("need --h > 0 and --samples >= 0")
    z0 = _default_z0(o, model)
    spin = o["spin_up"]
    if spin is None:
        spin = 10.0 if o["system"] in ("lorenz63", "lorenz96") else 0.0
    if isinstance(model, LinearScalarOde) and isinstance(model.lam, complex):
        raise UsageError("generate supports real-valued systems only")
    try:
        traj = reference_trajectory(model, z0, h, n, 0.0, o["rtol"], o["atol"], spin_up=float(spin))
    except SolverError as err:
        print(f"reference solver failed: {err}", file=sys.stderr)
        return EXIT_SOLVER
    traj.to_csv(o["out"])
    print(f"wrote {len(traj)} states to {o['out']}")
    return EXIT_OK


COMMANDS = {
    "train-stability": cmd_train_stability,
    "train-ode": cmd_train_ode,
    "train-joint": cmd_train_joint,
    "analyze": cmd_analyze,
    "integrate": cmd_integrate,
    "generate": cmd_generate,
}


def _join_lambda(argv: list[str]) -> list[str]:
    # argparse takes "-1j" for an option; glue the value onto the flag
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--lambda":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--lambda={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_lambda(argv))
    try:
        opts = _resolve(args)
        return COMMANDS[args.command](opts)
    except UsageError as err:
        print(f"adrk: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as err:
        print(f"adrk: training diverged: {err}", file=sys.stderr)
        return EXIT_UNCONVERGED


if __name__ == "__main__":
    sys.exit(main())
