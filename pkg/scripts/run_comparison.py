#!/usr/bin/env python3
"""Run the full estimator comparison and render its error plots.

Drives the public interfaces end to end: `sysid run` writes the results CSV
and manifest, `sysid summarize` prints the cross-seed aggregate table, and
plots/plot_errors.py renders one image per metric into the output directory.
"""

import argparse
import subprocess
import sys
from pathlib import Path


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="results", metavar="DIR")
    parser.add_argument("--T", default="1000000", help="stream horizon")
    parser.add_argument("--seeds", default="1,2,3,4,5", help="comma list of seeds")
    parser.add_argument(
        "--estimators", default="sgd_rer,sgd,sgd_er,ols", help="comma list"
    )
    parser.add_argument("--start", default="zero", choices=("zero", "stationary"))
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "comparison.csv"

    run = subprocess.run(
        [
            sys.executable, "-m", "sysid.cli", "run",
            "--T", args.T,
            "--seeds", args.seeds,
            "--estimators", args.estimators,
            "--start", args.start,
            "--out", str(csv_path),
        ]
    )
    if run.returncode:
        return run.returncode
    subprocess.run(
        [sys.executable, "-m", "sysid.cli", "summarize", "--in", str(csv_path)]
    )

    plot_script = Path(__file__).resolve().parents[1] / "plots" / "plot_errors.py"
    for metric in ("param_err", "pred_excess"):
        plotted = subprocess.run(
            [
                sys.executable, str(plot_script),
                "--in", str(csv_path),
                "--metric", metric,
                "--out", str(out_dir / f"{metric}.png"),
            ]
        )
        if plotted.returncode:
            return plotted.returncode
    return 0


if __name__ == "__main__":
    sys.exit(main())
