"""Synthetic data generation, CSV ingestion, and standardization."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import ActiveSet, Dataset, Standardization

# xor-ed into the seed to derive the independent test-data stream
TEST_STREAM_XOR = 0x5EED7E57


@dataclass(frozen=True)
class SyntheticConfig:
    """Design of one synthetic regression problem.

    The response is the sum of squares of the active coordinates plus
    Gaussian noise whose variance is calibrated so that the sample variance
    of the signal over the training inputs divided by the noise variance
    equals ``snr``.  Inputs are jointly Gaussian with an AR(1)-style
    correlation structure: corr(x^i, x^j) = rho^|i-j|.
    """

    n: int
    d: int
    s: int
    rho: float
    snr: float
    seed: int
    test_n: int = 1000
    support: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.s <= self.d:
            raise InvalidInputError(f"need 1 <= s <= d, got s={self.s}, d={self.d}")
        if not 0.0 <= self.rho < 1.0:
            raise InvalidInputError(f"rho must be in [0, 1), got {self.rho}")
        if not self.snr > 0:
            raise InvalidInputError(f"snr must be positive, got {self.snr}")
        if self.test_n < 1:
            raise InvalidInputError(f"test_n must be >= 1, got {self.test_n}")
        if self.support is not None:
            sup = tuple(sorted(int(k) for k in self.support))
            if len(sup) != self.s or any(k < 0 or k >= self.d for k in sup) \
                    or len(set(sup)) != self.s:
                raise InvalidInputError(
                    f"support must be {self.s} distinct indices in [0, {self.d})")
            object.__setattr__(self, "support", sup)

    def to_json_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "s": self.s, "rho": self.rho,
                "snr": self.snr, "seed": self.seed, "test_n": self.test_n,
                "support": list(self.support) if self.support else None}


@dataclass(frozen=True)
class SquaredSupportFunction:
    """The true signal: sum of squares of the active coordinates."""

    support: tuple[int, ...]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cols = list(self.support)
        return np.sum(X[:, cols] ** 2, axis=1)


@dataclass(frozen=True)
class SyntheticData:
    train: Dataset
    test: Dataset
    truth: ActiveSet
    f0: SquaredSupportFunction
    sigma: float
    config: SyntheticConfig


def _correlation_cholesky(d: int, rho: float) -> np.ndarray:
    idx = np.arange(d)
    sigma = rho ** np.abs(idx[:, None] - idx[None, :])
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        warnings.warn("correlation matrix numerically not PD; jittering diagonal")
        return np.linalg.cholesky(sigma + 1e-10 * np.eye(d))


def _draw_inputs(rng: np.random.Generator, n: int, d: int,
                 chol: np.ndarray) -> np.ndarray:
    return rng.standard_normal((n, d)) @ chol.T


def generate(config: SyntheticConfig) -> SyntheticData:
    """Draw a training set, an independent test set, and the true support.

    The test stream is seeded by ``seed ^ TEST_STREAM_XOR`` so train and test
    draws are independent yet reproducible from the single seed.
    """
    rng = np.random.default_rng(config.seed)
    if config.support is not None:
        support = config.support
    else:
        support = tuple(sorted(
            int(k) for k in rng.choice(config.d, size=config.s, replace=False)))
    f0 = SquaredSupportFunction(support)
    chol = _correlation_cholesky(config.d, config.rho)

    X = _draw_inputs(rng, config.n, config.d, chol)
    signal = f0(X)
    var = float(np.var(signal, ddof=1)) if config.n > 1 else 0.0
    sigma = float(np.sqrt(var / config.snr))
    y = signal + rng.normal(0.0, sigma, config.n) if sigma > 0 else signal.copy()

    rng_test = np.random.default_rng(config.seed ^ TEST_STREAM_XOR)
    X_test = _draw_inputs(rng_test, config.test_n, config.d, chol)
    y_test = f0(X_test)
    if sigma > 0:
        y_test = y_test + rng_test.normal(0.0, sigma, config.test_n)

    return SyntheticData(
        train=Dataset(X, y),
        test=Dataset(X_test, y_test),
        truth=ActiveSet(support),
        f0=f0,
        sigma=sigma,
        config=config,
    )


def read_csv(path, response_column: str,
             feature_columns: list[str] | None = None) -> Dataset:
    """Load a dataset from a comma-separated file with a header row.

    Every selected cell must parse as a number; rows with missing values and
    cells that fail to parse are reported with their file line numbers and
    column names.  UTF-8, '.' decimal separator.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file (header row required)")
        header = [h.strip() for h in header]
        if response_column not in header:
            raise InvalidInputError(
                f"{path}: response column {response_column!r} not found; "
                f"available: {header}")
        if feature_columns is None:
            feature_columns = [h for h in header if h != response_column]
        missing = [c for c in feature_columns if c not in header]
        if missing:
            raise InvalidInputError(f"{path}: feature columns not found: {missing}")
        if not feature_columns:
            raise InvalidInputError(f"{path}: no feature columns")
        col_idx = {name: header.index(name) for name in header}
        want = [response_column] + list(feature_columns)

        rows = []
        bad_rows = []
        for line_no, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue  # skip fully blank lines
            if len(rec) != len(header):
                raise InvalidInputError(
                    f"{path}: line {line_no} has {len(rec)} fields, "
                    f"expected {len(header)}")
            vals = []
            for name in want:
                cell = rec[col_idx[name]].strip()
                if cell == "":
                    bad_rows.append((line_no, name, "missing value"))
                    vals = None
                    break
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise InvalidInputError(
                        f"{path}: line {line_no}, column {name!r}: "
                        f"cannot parse {cell!r} as a number")
            if vals is not None:
                rows.append(vals)
        if bad_rows:
            detail = "; ".join(f"line {ln} ({col}: {why})"
                               for ln, col, why in bad_rows[:10])
            more = "" if len(bad_rows) <= 10 else f" and {len(bad_rows) - 10} more"
            raise InvalidInputError(
                f"{path}: {len(bad_rows)} row(s) with missing values "
                f"rejected: {detail}{more}")
        if not rows:
            raise InvalidInputError(f"{path}: no data rows")
    arr = np.array(rows, dtype=float)
    return Dataset(arr[:, 1:], arr[:, 0], feature_names=tuple(feature_columns))


def write_csv(data: Dataset, path, response_name: str = "y") -> None:
    """Write a dataset in the same format ``read_csv`` accepts."""
    names = data.feature_names or tuple(f"x{k + 1}" for k in range(data.d))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join([response_name, *names]) + "\n")
        for i in range(data.n):
            cells = [repr(float(data.y[i]))] + \
                [repr(float(v)) for v in data.X[i]]
            fh.write(",".join(cells) + "\n")


def write_sidecar(synthetic: SyntheticData, path) -> None:
    """JSON sidecar recording how a synthetic dataset was produced."""
    doc = {
        "config": synthetic.config.to_json_dict(),
        "support": list(synthetic.truth),
        "sigma": synthetic.sigma,
        "test_stream_xor": TEST_STREAM_XOR,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def standardize_fit(data: Dataset) -> Standardization:
    """Per-column z-score parameters from training data.

    Constant columns get scale 1 (with a warning) so the transform stays
    invertible.
    """
    x_mean = data.X.mean(axis=0)
    x_scale = data.X.std(axis=0)
    flat = x_scale == 0
    if np.any(flat):
        names = data.feature_names or tuple(f"x{k + 1}" for k in range(data.d))
        which = [names[k] for k in np.flatnonzero(flat)]
        warnings.warn(f"constant input column(s) {which}: using scale 1")
        x_scale = np.where(flat, 1.0, x_scale)
    y_mean = float(data.y.mean())
    y_scale = float(data.y.std())
    if y_scale == 0:
        warnings.warn("constant response: using scale 1")
        y_scale = 1.0
    return Standardization(x_mean, x_scale, y_mean, y_scale)


def standardize_apply(std: Standardization, data: Dataset) -> Dataset:
    return Dataset(std.apply_x(data.X), std.apply_y(data.y), data.feature_names)


def destandardize_y(std: Standardization, values: np.ndarray) -> np.ndarray:
    return std.invert_y(values)
