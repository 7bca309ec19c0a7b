"""Integration ability of RK4 and trained 4-stage schemes on Lorenz-63.

For each step size a scheme is trained on reference data sampled at that
step; both schemes are then simulated from (1, 1, 1) and classified.

    python scripts/run_lorenz_table.py --steps 0.1 0.15 0.16 0.17 0.18 0.19
"""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from adrk.experiments import LorenzTableExperiment, classify_lorenz, train_lorenz_table
from adrk.tableau import rk4_tableau, save_tableau


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/lorenz_table")
    ap.add_argument("--steps", type=float, nargs="+", default=[0.1, 0.15, 0.16, 0.17, 0.18, 0.19])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iterations", type=int, default=3000)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = LorenzTableExperiment()
    rows = []
    for h in args.steps:
        exp = replace(base, h_train=h, config=replace(base.config, seed=args.seed, iterations=args.iterations))
        res = train_lorenz_table(exp)
        save_tableau(res.tableau, out / f"adrk4_h{h:g}.json")
        res.run.save(out / f"adrk4_h{h:g}_run.json")
        row = {
            "h": h,
            "adrk4": classify_lorenz(res.tableau, h, [1.0, 1.0, 1.0], exp.steps).label,
            "rk4": classify_lorenz(rk4_tableau(), h, [1.0, 1.0, 1.0], exp.steps).label,
        }
        rows.append(row)
        print(json.dumps(row), flush=True)
    (out / "table.json").write_text(json.dumps(rows, indent=1))
    print("h      " + " ".join(f"{r['h']:>8g}" for r in rows))
    for name in ("adrk4", "rk4"):
        print(f"{name:6s} " + " ".join(f"{'ok' if r[name] == 'chaotic' else 'X':>8s}" for r in rows))


if __name__ == "__main__":
    main()
