"""Tuning grids, k-fold cross-validation, and evaluation metrics."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SolverFailure
from .estimators import FitResult, FitSpec, fit, fit_path, lambda_max
from .model import ActiveSet, Dataset, MaxAffineModel
from .qp import DEFAULT_TOLERANCES, SolveTolerances

CV_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TuningGrid:
    """Descending penalty levels, and relaxation levels for relaxed families.

    For the bound-constrained family (lasso2) the ``lambdas`` axis carries the
    per-row bound c instead of a multiplier; it is still swept descending.
    """

    lambdas: np.ndarray
    gammas: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    def __post_init__(self):
        lams = np.asarray(self.lambdas, dtype=float)
        gams = np.asarray(self.gammas, dtype=float)
        if lams.ndim != 1 or len(lams) == 0:
            raise InvalidInputError("lambdas must be a nonempty 1-D array")
        if np.any(np.diff(lams) > 0):
            raise InvalidInputError("lambdas must be nonincreasing")
        if np.any(lams < 0):
            raise InvalidInputError("lambdas must be nonnegative")
        if gams.ndim != 1 or len(gams) == 0 or np.any((gams < 0) | (gams > 1)):
            raise InvalidInputError("gammas must lie in [0, 1]")
        lams = lams.copy()
        lams.flags.writeable = False
        gams = gams.copy()
        gams.flags.writeable = False
        object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "gammas", gams)

    @classmethod
    def from_data(cls, data: Dataset, n_lambdas: int = 50,
                  min_frac: float = 1e-3, n_gammas: int = 11) -> "TuningGrid":
        """Log-spaced penalties from the largest useful level down to a
        fraction of it, and equally spaced relaxation levels on [0, 1]."""
        top = lambda_max(data)
        if top <= 0:
            lams = np.zeros(1)
        else:
            lams = np.geomspace(top, min_frac * top, n_lambdas)
        return cls(lams, np.linspace(0.0, 1.0, n_gammas))

    @classmethod
    def linear(cls, lo: float, hi: float, n: int, n_gammas: int = 11) -> "TuningGrid":
        """Equally spaced penalties over [lo, hi], swept descending."""
        return cls(np.linspace(hi, lo, n), np.linspace(0.0, 1.0, n_gammas))

    def cells(self, relaxed: bool):
        """(lambda, gamma-or-None) pairs in selection order: descending
        lambda outer, ascending gamma inner, so the first minimum found is the
        tie-break winner (larger lambda, then smaller gamma)."""
        if relaxed:
            return [(float(l), float(g)) for l in self.lambdas for g in self.gammas]
        return [(float(l), None) for l in self.lambdas]


def lasso2_c_grid(data: Dataset, n_values: int = 50, min_frac: float = 1e-3,
                  tol: SolveTolerances | None = None, backend=None,
                  n_gammas: int = 11) -> TuningGrid:
    """A bound grid for the per-row constrained family, anchored at a level
    where the bound is inactive (from an unpenalized pre-fit)."""
    from .estimators import fit_cnls

    base = fit_cnls(data, tol=tol, backend=backend)
    c_hi = 1.2 * float(np.max(np.sum(np.abs(base.model.xi.values), axis=1)))
    c_hi = max(c_hi, 1e-8)
    return TuningGrid(np.geomspace(c_hi, min_frac * c_hi, n_values),
                      np.linspace(0.0, 1.0, n_gammas))


@dataclass(frozen=True)
class CvReport:
    """Per-cell validation losses, the chosen cell, and the full-data refit."""

    family: str
    grid: TuningGrid
    cells: tuple
    fold_losses: np.ndarray  # (ncells, k), NaN where the solve failed
    mean_loss: np.ndarray
    chosen_index: int
    refit: FitResult
    k: int
    seed: int

    @property
    def chosen_lambda(self) -> float:
        return self.cells[self.chosen_index][0]

    @property
    def chosen_gamma(self) -> float | None:
        return self.cells[self.chosen_index][1]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": CV_SCHEMA_VERSION,
            "family": self.family,
            "k": self.k,
            "seed": self.seed,
            "lambdas": self.grid.lambdas.tolist(),
            "gammas": self.grid.gammas.tolist(),
            "cells": [
                {"lambda": lam, "gamma": gam,
                 "mean_loss": None if np.isnan(self.mean_loss[i]) else float(self.mean_loss[i]),
                 "fold_losses": [None if np.isnan(v) else float(v)
                                 for v in self.fold_losses[i]]}
                for i, (lam, gam) in enumerate(self.cells)
            ],
            "chosen": {"index": self.chosen_index,
                       "lambda": self.chosen_lambda,
                       "gamma": self.chosen_gamma,
                       "mean_loss": float(self.mean_loss[self.chosen_index])},
            "refit": {
                "active_set": list(self.refit.active_set),
                "sse": self.refit.sse,
                "penalty_value": self.refit.penalty_value,
                "solver_status": self.refit.solver.status,
            },
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    def write_csv(self, path) -> None:
        """One row per grid cell per fold: cell,lambda,gamma,fold,loss."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("cell,lambda,gamma,fold,loss\n")
            for i, (lam, gam) in enumerate(self.cells):
                g = "" if gam is None else repr(gam)
                for fold in range(self.k):
                    v = self.fold_losses[i, fold]
                    loss = "" if np.isnan(v) else repr(float(v))
                    fh.write(f"{i},{lam!r},{g},{fold},{loss}\n")


def _fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [np.sort(f) for f in np.array_split(rng.permutation(n), k)]


def _fold_losses(data: Dataset, family: str, grid: TuningGrid,
                 val_idx: np.ndarray, options: dict) -> np.ndarray:
    mask = np.ones(data.n, dtype=bool)
    mask[val_idx] = False
    train = Dataset(data.X[mask], data.y[mask])
    X_val = data.X[val_idx]
    true_fn = options.get("true_fn")
    target = np.asarray(true_fn(X_val)) if true_fn is not None else data.y[val_idx]
    std = None
    if options.get("standardize"):
        from .data import standardize_apply, standardize_fit

        std = standardize_fit(train)
        train = standardize_apply(std, train)
    relaxed = family.startswith("relaxed")
    tol = options.get("tol") or DEFAULT_TOLERANCES
    fits = fit_path(
        train, family, grid.lambdas,
        gammas=grid.gammas if relaxed else None,
        monotone=options.get("monotone", False),
        zero_tau=options.get("zero_tau"),
        weights_init=options.get("weights_init", "slasso"),
        weights_init_frac=options.get("weights_init_frac", 0.1),
        tol=tol, backend=options.get("backend"),
        skip_failures=True)
    losses = []
    if relaxed:
        for li in range(len(grid.lambdas)):
            for gi in range(len(grid.gammas)):
                res = fits.get((li, gi))
                losses.append(_loss(res, X_val, target, std))
    else:
        for res in fits:
            losses.append(_loss(res, X_val, target, std))
    return np.array(losses)


def _loss(res: FitResult | None, X_val, target, std=None) -> float:
    if res is None:
        return np.nan
    model = res.model if std is None else res.model.with_standardization(std)
    pred = model.evaluate(X_val)
    return float(np.mean((pred - target) ** 2))


def _fold_worker(payload):
    (X, y, names, family, lambdas, gammas, val_idx, options) = payload
    data = Dataset(X, y, names)
    grid = TuningGrid(lambdas, gammas)
    return _fold_losses(data, family, grid, val_idx, options)


def k_fold_cv(data: Dataset, family: str, grid: TuningGrid, k: int = 5,
              seed: int = 0, *, monotone: bool = False,
              zero_tau: float | None = None, weights_init: str = "slasso",
              weights_init_frac: float = 0.1,
              tol: SolveTolerances | None = None, backend=None,
              jobs: int = 1, true_fn=None, standardize: bool = False) -> CvReport:
    """Deterministic k-fold cross-validation over the tuning grid.

    Folds come from a seeded permutation split into k contiguous blocks.
    Each cell is scored by mean squared prediction error against the held-out
    responses (or against ``true_fn`` values, for oracle-style diagnostics on
    synthetic data).  The chosen cell minimizes the mean loss across folds,
    with ties broken toward larger lambda and then smaller gamma, and the
    model is refit on all data at that cell.

    With ``standardize``, each fold z-scores on its own training part and the
    refit standardizes on the full data; losses and predictions stay in
    original units.
    """
    if k < 2:
        raise InvalidInputError(f"k must be at least 2, got {k}")
    if data.n < k:
        raise InvalidInputError(f"need at least k={k} observations, got {data.n}")
    relaxed = family.startswith("relaxed")
    cells = grid.cells(relaxed)
    options = {"monotone": monotone, "zero_tau": zero_tau,
               "weights_init": weights_init, "weights_init_frac": weights_init_frac,
               "tol": tol, "backend": backend, "true_fn": true_fn,
               "standardize": standardize}
    folds = _fold_indices(data.n, k, seed)

    parallel_ok = jobs > 1 and (backend is None or isinstance(backend, str))
    if parallel_ok:
        payloads = [(data.X, data.y, data.feature_names, family,
                     grid.lambdas, grid.gammas, f, options) for f in folds]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_fold = list(pool.map(_fold_worker, payloads))
    else:
        per_fold = [_fold_losses(data, family, grid, f, options) for f in folds]

    fold_losses = np.column_stack(per_fold)  # (ncells, k)
    with np.errstate(invalid="ignore"):
        mean_loss = np.where(np.all(np.isnan(fold_losses), axis=1), np.nan,
                             np.nanmean(fold_losses, axis=1))
    if np.all(np.isnan(mean_loss)):
        raise SolverFailure("every grid cell failed in every fold")
    chosen = int(np.nanargmin(mean_loss))

    lam_star, gam_star = cells[chosen]
    if family == "lasso2":
        spec = FitSpec("lasso2", c_bound=lam_star, monotone=monotone,
                       zero_tau=zero_tau)
    else:
        spec = FitSpec(family, lam=lam_star,
                       gamma=gam_star if gam_star is not None else 1.0,
                       monotone=monotone, zero_tau=zero_tau,
                       weights_init=weights_init,
                       weights_init_frac=weights_init_frac)
    refit_data = data
    std_full = None
    if standardize:
        from .data import standardize_apply, standardize_fit

        std_full = standardize_fit(data)
        refit_data = standardize_apply(std_full, data)
    refit = fit(refit_data, spec, tol, backend)
    if std_full is not None:
        from dataclasses import replace as _replace

        refit = _replace(refit, model=refit.model.with_standardization(std_full))
    return CvReport(family=family, grid=grid, cells=tuple(cells),
                    fold_losses=fold_losses, mean_loss=mean_loss,
                    chosen_index=chosen, refit=refit, k=k, seed=seed)


def holdout_validate(train: Dataset, validation: Dataset, family: str,
                     grid: TuningGrid, *, monotone: bool = False,
                     zero_tau: float | None = None,
                     weights_init: str = "slasso",
                     weights_init_frac: float = 0.1,
                     tol: SolveTolerances | None = None, backend=None,
                     true_fn=None) -> CvReport:
    """Tune on an explicit validation set instead of folds.

    Fits the whole grid on ``train``, scores each cell by mean squared error
    against the validation responses (or ``true_fn`` values), and keeps the
    train-data fit at the winning cell.  Returned as a one-fold report.
    """
    if train.d != validation.d:
        raise InvalidInputError("train and validation dimensions differ")
    relaxed = family.startswith("relaxed")
    cells = grid.cells(relaxed)
    target = np.asarray(true_fn(validation.X)) if true_fn is not None \
        else validation.y
    fits = fit_path(train, family, grid.lambdas,
                    gammas=grid.gammas if relaxed else None,
                    monotone=monotone, zero_tau=zero_tau,
                    weights_init=weights_init,
                    weights_init_frac=weights_init_frac,
                    tol=tol, backend=backend, skip_failures=True)
    flat = []
    kept = {}
    if relaxed:
        for li in range(len(grid.lambdas)):
            for gi in range(len(grid.gammas)):
                res = fits.get((li, gi))
                kept[len(flat)] = res
                flat.append(_loss(res, validation.X, target))
    else:
        for res in fits:
            kept[len(flat)] = res
            flat.append(_loss(res, validation.X, target))
    losses = np.array(flat)
    if np.all(np.isnan(losses)):
        raise SolverFailure("every grid cell failed on the training data")
    chosen = int(np.nanargmin(losses))
    return CvReport(family=family, grid=grid, cells=tuple(cells),
                    fold_losses=losses[:, None], mean_loss=losses,
                    chosen_index=chosen, refit=kept[chosen], k=1, seed=0)


def prediction_error(model: MaxAffineModel, test_X: np.ndarray, f0) -> float:
    """Relative squared error against the true function on test inputs."""
    test_X = np.atleast_2d(np.asarray(test_X, dtype=float))
    truth = np.asarray(f0(test_X), dtype=float)
    denom = float(np.sum(truth ** 2))
    if denom == 0.0:
        raise InvalidInputError(
            "prediction error is undefined when the true function is zero "
            "on the whole test sample")
    pred = model.evaluate(test_X)
    return float(np.sum((pred - truth) ** 2) / denom)


def test_error(model: MaxAffineModel, test_X: np.ndarray,
               test_y: np.ndarray) -> float:
    """Mean squared error against observed test responses."""
    test_X = np.atleast_2d(np.asarray(test_X, dtype=float))
    test_y = np.asarray(test_y, dtype=float)
    pred = model.evaluate(test_X)
    return float(np.mean((pred - test_y) ** 2))


def f_score(selected: ActiveSet, truth: ActiveSet) -> float:
    """Harmonic mean of precision and recall of the selected variables."""
    if len(truth) == 0:
        raise InvalidInputError("the true support must be nonempty")
    if len(selected) == 0:
        return 0.0
    tp = len(set(selected.indices) & set(truth.indices))
    if tp == 0:
        return 0.0
    precision = tp / len(selected)
    recall = tp / len(truth)
    return 2.0 / (1.0 / recall + 1.0 / precision)


def nonzeros_count(selected: ActiveSet) -> int:
    return len(selected)
