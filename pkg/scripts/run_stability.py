"""Stability-constrained design: real and imaginary axis, several stage counts.

Writes one tableau JSON and one region CSV per run plus a summary table.

    python scripts/run_stability.py --out results/stability --stages 4 7
"""

import argparse
import json
from pathlib import Path

from adrk.experiments import StabilityExperiment, run_stability
from adrk.stability import region_scan
from adrk.tableau import save_tableau
from adrk.training import stability_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/stability")
    ap.add_argument("--stages", type=int, nargs="+", default=[4])
    ap.add_argument("--axes", nargs="+", choices=("real", "imaginary"), default=["real", "imaginary"])
    ap.add_argument("--lambda-abs", type=float, default=4.0, help="|lambda| for the real axis (imaginary uses 1)")
    ap.add_argument("--iterations", type=int, default=50000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for q in args.stages:
        for axis in args.axes:
            lam = -args.lambda_abs if axis == "real" else -1j
            exp = StabilityExperiment(q=q, lam=lam, config=stability_config(iterations=args.iterations, seed=args.seed))
            res = run_stability(exp)
            tag = f"q{q}_{axis}"
            save_tableau(res.tableau, out / f"{tag}.json")
            res.run.save(out / f"{tag}_run.json")
            extent = 1.1 * exp.target
            region_scan(res.tableau, (-extent, 1.0), (-extent / 2, extent / 2), 301).to_csv(out / f"{tag}_region.csv")
            row = {
                "q": q,
                "axis": axis,
                "target": exp.target,
                "limit": round(res.limit, 4),
                "converged": res.run.converged,
                "iterations": res.run.iterations,
                "order": res.order,
                "alpha": [round(a, 6) for a in res.coeffs],
            }
            rows.append(row)
            print(json.dumps(row))
    (out / "summary.json").write_text(json.dumps(rows, indent=1))


if __name__ == "__main__":
    main()
