"""Command-line front end: fit, cross-validate, simulate, and predict.

Every run writes its outputs plus a single ``manifest.json`` into --out-dir.
All randomness flows from --seed; result CSV/JSON files contain no
timestamps, so reruns with the same arguments reproduce them byte for byte
(the manifest records wall-clock time and is the one non-reproducible file).

Exit codes: 2 for invalid arguments or input data, 3 for solver failures.
"""

from __future__ import annotations

import argparse
import csv as _csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    SyntheticConfig,
    generate,
    read_csv,
    standardize_apply,
    standardize_fit,
)
from .errors import InvalidInputError, SolverFailure
from .estimators import FAMILIES, FitSpec, fit, fit_path
from .model import MaxAffineModel
from .qp import SolveTolerances
from .selection import TuningGrid, f_score, k_fold_cv, lasso2_c_grid, \
    nonzeros_count, prediction_error, test_error

MANIFEST_SCHEMA_VERSION = 1
SUMMARY_SCHEMA_VERSION = 1


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, argv, args, inputs) -> None:
    config = {}
    for key, val in sorted(vars(args).items()):
        if key == "func":
            continue
        config[key] = val
    doc = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "command": command,
        "argv": list(argv),
        "config": config,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "inputs": {str(p): _sha256(p) for p in inputs if p is not None},
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _tolerances(args) -> SolveTolerances:
    return SolveTolerances(eps_feas=args.tol_feas, eps_kkt=args.tol_kkt)


def _backend_name(args) -> str:
    if args.backend is not None:
        return args.backend
    return os.environ.get("SHAPELASSO_BACKEND", "builtin")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_csv_dataset(args):
    features = None
    if args.features:
        features = [c.strip() for c in args.features.split(",") if c.strip()]
    return read_csv(args.data, args.response, features)


def _spec_from_args(args) -> FitSpec:
    family = args.family
    kwargs = {"monotone": args.monotone, "weights_init": args.weights_init,
              "weights_init_frac": args.weights_init_frac}
    if args.zero_tau is not None:
        kwargs["zero_tau"] = args.zero_tau
    if family == "cnls":
        return FitSpec("cnls", **kwargs)
    if family == "lasso2":
        if args.c_bound is None:
            raise InvalidInputError("--c-bound is required for family lasso2")
        return FitSpec("lasso2", c_bound=args.c_bound, **kwargs)
    if args.lam is None:
        raise InvalidInputError(f"--lambda is required for family {family}")
    if family.startswith("relaxed"):
        if args.gamma is None:
            raise InvalidInputError(f"--gamma is required for family {family}")
        return FitSpec(family, lam=args.lam, gamma=args.gamma, **kwargs)
    return FitSpec(family, lam=args.lam, **kwargs)


def _fit_summary(result) -> dict:
    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "family": result.spec.family,
        "lambda": result.spec.lam,
        "gamma": result.spec.gamma if result.spec.family.startswith("relaxed") else None,
        "c_bound": result.spec.c_bound,
        "monotone": result.spec.monotone,
        "sse": result.sse,
        "penalty_value": result.penalty_value,
        "active_set": list(result.active_set),
        "num_nonzeros": nonzeros_count(result.active_set),
        "stage1_active_set": (list(result.stage1_active_set)
                              if result.stage1_active_set is not None else None),
        "warnings": list(result.warnings),
        "solver": {
            "status": result.solver.status,
            "iterations": result.solver.iterations,
            "primal_residual": result.solver.primal_residual,
            "objective": result.solver.objective,
        },
    }


def cmd_fit(args, argv) -> int:
    out = _out_dir(args)
    data = _load_csv_dataset(args)
    spec = _spec_from_args(args)
    std = None
    if args.standardize:
        std = standardize_fit(data)
        data = standardize_apply(std, data)
    result = fit(data, spec, _tolerances(args), _backend_name(args))
    model = result.model if std is None else result.model.with_standardization(std)
    model.save_json(out / "model.json")
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(_fit_summary(result), fh, indent=2)
        fh.write("\n")
    _write_manifest(out, "fit", argv, args, [args.data])
    print(f"wrote {out / 'model.json'} and {out / 'summary.json'}")
    return 0


def _grid_from_args(args, data, tol, backend) -> TuningGrid:
    if args.family == "lasso2":
        return lasso2_c_grid(data, n_values=args.grid_lambdas,
                             min_frac=args.lambda_min_frac,
                             tol=tol, backend=backend,
                             n_gammas=args.grid_gammas)
    if args.lambda_lo is not None and args.lambda_hi is not None:
        grid = TuningGrid.linear(args.lambda_lo, args.lambda_hi,
                                 args.grid_lambdas, n_gammas=args.grid_gammas)
        return grid
    return TuningGrid.from_data(data, n_lambdas=args.grid_lambdas,
                                min_frac=args.lambda_min_frac,
                                n_gammas=args.grid_gammas)


def cmd_cv(args, argv) -> int:
    out = _out_dir(args)
    data = _load_csv_dataset(args)
    tol = _tolerances(args)
    backend = _backend_name(args)
    grid = _grid_from_args(args, data, tol, backend)
    report = k_fold_cv(
        data, args.family, grid, k=args.folds, seed=args.seed,
        monotone=args.monotone, zero_tau=args.zero_tau,
        weights_init=args.weights_init, weights_init_frac=args.weights_init_frac,
        tol=tol, backend=backend, jobs=args.jobs,
        standardize=args.standardize)
    report.write_csv(out / "cv_report.csv")
    report.write_json(out / "cv_report.json")
    report.refit.model.save_json(out / "model.json")
    _write_manifest(out, "cv", argv, args, [args.data])
    gam = "" if report.chosen_gamma is None else f", gamma*={report.chosen_gamma:g}"
    print(f"chosen lambda*={report.chosen_lambda:g}{gam}; "
          f"wrote cv_report.csv, cv_report.json, model.json in {out}")
    return 0


MC_COLUMNS = ("n", "d", "s", "rho", "snr", "family", "rep", "seed",
              "chosen_lambda", "chosen_gamma", "num_nonzeros", "f_score",
              "prediction_error", "test_error", "failed_cells")


def _simulate_one(payload: dict) -> dict:
    """One Monte-Carlo replication: generate, tune, refit, score."""
    cfg = SyntheticConfig(
        n=payload["n"], d=payload["d"], s=payload["s"], rho=payload["rho"],
        snr=payload["snr"], seed=payload["seed"], test_n=payload["test_n"],
        support=payload["support"])
    synth = generate(cfg)
    tol = SolveTolerances(eps_feas=payload["tol_feas"], eps_kkt=payload["tol_kkt"])
    family = payload["family"]
    if family == "lasso2":
        grid = lasso2_c_grid(synth.train, n_values=payload["grid_lambdas"],
                             min_frac=payload["lambda_min_frac"],
                             tol=tol, backend=payload["backend"],
                             n_gammas=payload["grid_gammas"])
    else:
        grid = TuningGrid.from_data(synth.train, n_lambdas=payload["grid_lambdas"],
                                    min_frac=payload["lambda_min_frac"],
                                    n_gammas=payload["grid_gammas"])
    report = k_fold_cv(
        synth.train, family, grid, k=payload["folds"], seed=payload["seed"],
        monotone=payload["monotone"], weights_init=payload["weights_init"],
        weights_init_frac=payload["weights_init_frac"],
        tol=tol, backend=payload["backend"])
    model = report.refit.model
    failed = int(np.sum(np.isnan(report.fold_losses)))
    return {
        "n": cfg.n, "d": cfg.d, "s": cfg.s, "rho": cfg.rho, "snr": cfg.snr,
        "family": family, "rep": payload["rep"], "seed": cfg.seed,
        "chosen_lambda": report.chosen_lambda,
        "chosen_gamma": report.chosen_gamma,
        "num_nonzeros": nonzeros_count(report.refit.active_set),
        "f_score": f_score(report.refit.active_set, synth.truth),
        "prediction_error": prediction_error(model, synth.test.X, synth.f0),
        "test_error": test_error(model, synth.test.X, synth.test.y),
        "failed_cells": failed,
    }


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")


def cmd_simulate(args, argv) -> int:
    out = _out_dir(args)
    if args.sweep_relaxed:
        return _sweep_relaxed(args, argv, out)
    families = [f.strip() for f in args.family.split(",")]
    for fam in families:
        if fam not in FAMILIES:
            raise InvalidInputError(f"unknown family {fam!r}")
    snrs = [float(v) for v in args.snr.split(",")]
    support = None
    if args.support:
        support = tuple(int(k) for k in args.support.split(","))

    payload_base = {
        "n": args.n, "d": args.d, "s": args.s, "rho": args.rho,
        "test_n": args.test_n, "support": support,
        "grid_lambdas": args.grid_lambdas, "grid_gammas": args.grid_gammas,
        "lambda_min_frac": args.lambda_min_frac, "folds": args.folds,
        "monotone": args.monotone, "weights_init": args.weights_init,
        "weights_init_frac": args.weights_init_frac,
        "backend": _backend_name(args),
        "tol_feas": args.tol_feas, "tol_kkt": args.tol_kkt,
    }
    tasks = []
    for snr in snrs:
        for fam in families:
            for rep in range(args.reps):
                payload = dict(payload_base)
                payload.update(snr=snr, family=fam, rep=rep,
                               seed=args.seed + rep)
                tasks.append(payload)

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_simulate_one, tasks))
    else:
        rows = [_simulate_one(t) for t in tasks]

    _write_rows_csv(out / "mc_results.csv", MC_COLUMNS, rows)

    # aggregate means per (snr, family) in task order
    agg_cols = ("n", "d", "s", "rho", "snr", "family", "reps",
                "mean_num_nonzeros", "mean_f_score", "mean_prediction_error",
                "mean_test_error", "total_failed_cells")
    agg_rows = []
    for snr in snrs:
        for fam in families:
            sub = [r for r in rows if r["snr"] == snr and r["family"] == fam]
            agg_rows.append({
                "n": args.n, "d": args.d, "s": args.s, "rho": args.rho,
                "snr": snr, "family": fam, "reps": len(sub),
                "mean_num_nonzeros": float(np.mean([r["num_nonzeros"] for r in sub])),
                "mean_f_score": float(np.mean([r["f_score"] for r in sub])),
                "mean_prediction_error":
                    float(np.mean([r["prediction_error"] for r in sub])),
                "mean_test_error": float(np.mean([r["test_error"] for r in sub])),
                "total_failed_cells": sum(r["failed_cells"] for r in sub),
            })
    _write_rows_csv(out / "mc_aggregate.csv", agg_cols, agg_rows)

    # per-SNR series per family, ready for plotting
    fig_dir = out / "figures_data"
    fig_dir.mkdir(exist_ok=True)
    series_cols = ("snr", "mean_prediction_error", "mean_test_error",
                   "mean_num_nonzeros", "mean_f_score")
    for fam in families:
        series = [
            {c: r[{"snr": "snr"}.get(c, c)] for c in series_cols}
            for r in agg_rows if r["family"] == fam
        ]
        _write_rows_csv(fig_dir / f"{fam}_by_snr.csv", series_cols, series)

    _write_manifest(out, "simulate", argv, args, [])
    print(f"wrote {out / 'mc_results.csv'} ({len(rows)} replications), "
          f"mc_aggregate.csv, figures_data/")
    return 0


def _sweep_relaxed(args, argv, out: Path) -> int:
    """Fit one synthetic dataset over the whole (lambda, gamma) surface."""
    family = args.family if args.family.startswith("relaxed") else "relaxed_slasso"
    support = None
    if args.support:
        support = tuple(int(k) for k in args.support.split(","))
    snr = float(args.snr.split(",")[0])
    cfg = SyntheticConfig(n=args.n, d=args.d, s=args.s, rho=args.rho, snr=snr,
                          seed=args.seed, test_n=args.test_n, support=support)
    synth = generate(cfg)
    tol = _tolerances(args)
    grid = TuningGrid.from_data(synth.train, n_lambdas=args.grid_lambdas,
                                min_frac=args.lambda_min_frac,
                                n_gammas=args.grid_gammas)
    fits = fit_path(synth.train, family, grid.lambdas, gammas=grid.gammas,
                    monotone=args.monotone, weights_init=args.weights_init,
                    weights_init_frac=args.weights_init_frac,
                    tol=tol, backend=_backend_name(args), skip_failures=True)
    cols = ("lambda", "gamma", "num_nonzeros", "prediction_error", "test_error")
    rows = []
    for li, lam in enumerate(grid.lambdas):
        for gi, gam in enumerate(grid.gammas):
            res = fits.get((li, gi))
            if res is None:
                rows.append({"lambda": float(lam), "gamma": float(gam),
                             "num_nonzeros": None, "prediction_error": None,
                             "test_error": None})
                continue
            rows.append({
                "lambda": float(lam), "gamma": float(gam),
                "num_nonzeros": nonzeros_count(res.active_set),
                "prediction_error": prediction_error(res.model, synth.test.X,
                                                     synth.f0),
                "test_error": test_error(res.model, synth.test.X, synth.test.y),
            })
    _write_rows_csv(out / "relaxed_sweep.csv", cols, rows)
    _write_manifest(out, "simulate", argv, args, [])
    print(f"wrote {out / 'relaxed_sweep.csv'} ({len(rows)} cells)")
    return 0


def cmd_predict(args, argv) -> int:
    out = _out_dir(args)
    model = MaxAffineModel.load_json(args.model)
    # tolerate a file with a header and no rows: empty predictions
    with open(args.data, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        has_rows = any(any(c.strip() for c in rec) for rec in reader)
    if header is None:
        raise InvalidInputError(f"{args.data}: empty file (header row required)")
    if not has_rows:
        with open(out / "predictions.csv", "w", encoding="utf-8") as fh:
            fh.write("row,prediction\n")
        _write_manifest(out, "predict", argv, args, [args.model, args.data])
        print(f"wrote {out / 'predictions.csv'} (0 rows)")
        return 0

    features = None
    if args.features:
        features = [c.strip() for c in args.features.split(",") if c.strip()]
    elif model.metadata.get("feature_names"):
        wanted = model.metadata["feature_names"]
        if all(name in header for name in wanted):
            features = list(wanted)
    X = _read_matrix(args.data, features, args.response)
    if X.shape[1] != model.d:
        raise InvalidInputError(
            f"input has {X.shape[1]} feature columns, model expects {model.d}")
    preds = model.evaluate(X)
    with open(out / "predictions.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("row,prediction\n")
        for i, v in enumerate(preds):
            fh.write(f"{i},{float(v)!r}\n")
    _write_manifest(out, "predict", argv, args, [args.model, args.data])
    print(f"wrote {out / 'predictions.csv'} ({len(preds)} rows)")
    return 0


def _read_matrix(path, features, response) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if features is None:
            features = [h for h in header if h != response]
        missing = [c for c in features if c not in header]
        if missing:
            raise InvalidInputError(f"{path}: columns not found: {missing}")
        idx = [header.index(c) for c in features]
        rows = []
        for line_no, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                rows.append([float(rec[i]) for i in idx])
            except (ValueError, IndexError):
                raise InvalidInputError(
                    f"{path}: line {line_no}: cannot parse feature values")
    return np.array(rows, dtype=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapelasso",
        description="Sparse convex regression: fitting, cross-validation, "
                    "simulation, and prediction.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_family=True):
        if with_family:
            p.add_argument("--family", required=True, choices=FAMILIES)
        p.add_argument("--monotone", action="store_true",
                       help="impose nondecreasing shape (nonnegative subgradients)")
        p.add_argument("--weights-init", choices=("cnls", "slasso"),
                       default="slasso",
                       help="initial estimator for adaptive weights")
        p.add_argument("--weights-init-frac", type=float, default=0.1,
                       help="penalty fraction for the slasso weights initializer")
        p.add_argument("--zero-tau", type=float, default=None,
                       help="zero threshold for support detection "
                            "(default: scale-relative)")
        p.add_argument("--backend", choices=("builtin", "external"), default=None,
                       help="QP backend (default: $SHAPELASSO_BACKEND or builtin)")
        p.add_argument("--tol-feas", type=float, default=1e-6)
        p.add_argument("--tol-kkt", type=float, default=1e-6)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out-dir", required=True)

    def data_args(p):
        p.add_argument("--data", required=True, help="input CSV file")
        p.add_argument("--response", required=True, help="response column name")
        p.add_argument("--features", default=None,
                       help="comma-separated feature columns (default: all others)")
        p.add_argument("--standardize", action="store_true",
                       help="z-score inputs and response before fitting; "
                            "predictions are reported in original units")

    p_fit = sub.add_parser("fit", help="fit one estimator at fixed parameters")
    common(p_fit)
    data_args(p_fit)
    p_fit.add_argument("--lambda", dest="lam", type=float, default=None)
    p_fit.add_argument("--gamma", type=float, default=None)
    p_fit.add_argument("--c-bound", type=float, default=None)
    p_fit.set_defaults(func=cmd_fit)

    p_cv = sub.add_parser("cv", help="cross-validate the tuning parameters")
    common(p_cv)
    data_args(p_cv)
    p_cv.add_argument("--folds", type=int, default=5)
    p_cv.add_argument("--grid-lambdas", type=int, default=50)
    p_cv.add_argument("--grid-gammas", type=int, default=11)
    p_cv.add_argument("--lambda-min-frac", type=float, default=1e-3)
    p_cv.add_argument("--lambda-lo", type=float, default=None,
                      help="use an equally spaced grid from --lambda-lo "
                           "to --lambda-hi instead of the log-spaced default")
    p_cv.add_argument("--lambda-hi", type=float, default=None)
    p_cv.set_defaults(func=cmd_cv)

    p_sim = sub.add_parser("simulate",
                           help="Monte-Carlo study on synthetic data")
    common(p_sim)
    p_sim.add_argument("--n", type=int, default=100)
    p_sim.add_argument("--d", type=int, default=10)
    p_sim.add_argument("--s", type=int, default=2)
    p_sim.add_argument("--rho", type=float, default=0.3)
    p_sim.add_argument("--snr", default="7",
                       help="comma-separated signal-to-noise ratios")
    p_sim.add_argument("--reps", type=int, default=20)
    p_sim.add_argument("--test-n", type=int, default=1000)
    p_sim.add_argument("--support", default=None,
                       help="fix the true support, e.g. '3,9' (default: random)")
    p_sim.add_argument("--folds", type=int, default=5)
    p_sim.add_argument("--grid-lambdas", type=int, default=50)
    p_sim.add_argument("--grid-gammas", type=int, default=11)
    p_sim.add_argument("--lambda-min-frac", type=float, default=1e-3)
    p_sim.add_argument("--sweep-relaxed", action="store_true",
                       help="emit the full (lambda, gamma) surface for one "
                            "dataset instead of a replicated study")
    p_sim.set_defaults(func=cmd_simulate)
    # simulate sweeps families itself, so --family accepts a comma list
    for action in p_sim._actions:
        if action.dest == "family":
            action.choices = None
            action.help = "comma-separated families to run"

    p_pred = sub.add_parser("predict", help="apply a saved model to a CSV")
    common(p_pred, with_family=False)
    p_pred.add_argument("--model", required=True, help="model.json to load")
    p_pred.add_argument("--data", required=True, help="input CSV file")
    p_pred.add_argument("--response", default=None,
                        help="response column to exclude, if present")
    p_pred.add_argument("--features", default=None,
                        help="comma-separated feature columns")
    p_pred.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
