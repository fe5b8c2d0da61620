#!/usr/bin/env python3
"""Prediction error and sparsity over the whole (lambda, gamma) surface.

Fits the two-stage relaxed estimator on one synthetic dataset for every grid
cell and writes relaxed_sweep.csv (lambda, gamma, num_nonzeros,
prediction_error, test_error).  The gamma=1 rows are the standard
column-penalized estimator; comparing them with gamma<1 rows shows how the
second tuning parameter decouples variable selection from shrinkage.

Example:
    python scripts/run_relaxed_sweep.py --out-dir results/sweep
"""

import argparse
import sys

from shapelasso.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--s", type=int, default=2)
    ap.add_argument("--rho", type=float, default=0.3)
    ap.add_argument("--snr", default="2")
    ap.add_argument("--family", default="relaxed_slasso",
                    choices=("relaxed_slasso", "relaxed_aslasso"))
    ap.add_argument("--grid-lambdas", type=int, default=50)
    ap.add_argument("--grid-gammas", type=int, default=11)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--backend", choices=("builtin", "external"), default="external")
    args = ap.parse_args()
    return cli_main([
        "simulate", "--sweep-relaxed", "--family", args.family,
        "--n", str(args.n), "--d", str(args.d), "--s", str(args.s),
        "--rho", str(args.rho), "--snr", args.snr,
        "--grid-lambdas", str(args.grid_lambdas),
        "--grid-gammas", str(args.grid_gammas),
        "--seed", str(args.seed), "--backend", args.backend,
        "--out-dir", args.out_dir,
    ])


if __name__ == "__main__":
    sys.exit(main())
