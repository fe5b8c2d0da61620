#!/usr/bin/env python3
"""Desk-scale variable-selection and prediction-accuracy study.

Sweeps the three penalized families over a list of signal-to-noise ratios at
n=100, d=10, s=2, rho=0.3 and aggregates per-family means, mirroring the
layout of the accuracy/prediction tables.  Results land in --out-dir as
mc_results.csv / mc_aggregate.csv plus per-family SNR series under
figures_data/.

Example (about two hours with the external backend on two cores):
    python scripts/run_tables.py --out-dir results/tables --reps 20 --jobs 2
"""

import argparse
import sys

from shapelasso.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--snr", default="0.5,2,7")
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--s", type=int, default=2)
    ap.add_argument("--rho", type=float, default=0.3)
    ap.add_argument("--families", default="lasso1,slasso,aslasso")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--backend", choices=("builtin", "external"), default="external")
    args = ap.parse_args()
    return cli_main([
        "simulate", "--family", args.families,
        "--n", str(args.n), "--d", str(args.d), "--s", str(args.s),
        "--rho", str(args.rho), "--snr", args.snr,
        "--reps", str(args.reps), "--seed", str(args.seed),
        "--jobs", str(args.jobs), "--backend", args.backend,
        "--out-dir", args.out_dir,
    ])


if __name__ == "__main__":
    sys.exit(main())
