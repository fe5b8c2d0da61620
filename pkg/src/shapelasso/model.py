"""Domain types: datasets, subgradient matrices, and fitted max-affine models.

A fitted convex function is represented by its values ``theta`` and
subgradients ``xi`` at the training points ("anchors"); evaluation takes the
pointwise maximum of the supporting hyperplanes.  All types are immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInputError

MODEL_SCHEMA_VERSION = 1


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.flags.writeable = False
    return out


def _require_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{what} contains non-finite entries")


@dataclass(frozen=True)
class Dataset:
    """Observations: input matrix ``X`` (n x d, rows are points) and response ``y``."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = _frozen(self.X)
        y = _frozen(self.y)
        if X.ndim != 2:
            raise InvalidInputError(f"X must be 2-D, got shape {X.shape}")
        if y.ndim != 1:
            raise InvalidInputError(f"y must be 1-D, got shape {y.shape}")
        n, d = X.shape
        if n < 1 or d < 1:
            raise InvalidInputError(f"need n >= 1 and d >= 1, got X shape {X.shape}")
        if len(y) != n:
            raise InvalidInputError(f"X has {n} rows but y has {len(y)} entries")
        _require_finite(X, "X")
        _require_finite(y, "y")
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != d:
                raise InvalidInputError(
                    f"feature_names has {len(names)} entries for {d} columns")
            if len(set(names)) != d:
                raise InvalidInputError("feature_names must be distinct")
            object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class SubgradientMatrix:
    """The n x d matrix whose row i is the fitted hyperplane slope at point i.

    Column k collects variable k's slopes across all observations; a variable
    is screened out when its whole column is (numerically) zero.
    """

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2:
            raise InvalidInputError(f"subgradient matrix must be 2-D, got {v.shape}")
        _require_finite(v, "subgradient matrix")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column_norms(self, order=2) -> np.ndarray:
        return np.linalg.norm(self.values, ord=order, axis=0)


@dataclass(frozen=True)
class ActiveSet:
    """Sorted indices (0-based) of columns with a nonzero subgradient column."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise InvalidInputError("active set indices must be distinct")
        if idx and idx[0] < 0:
            raise InvalidInputError("active set indices must be nonnegative")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, k) -> bool:
        return int(k) in self.indices


@dataclass(frozen=True)
class Standardization:
    """Per-column z-score transform fitted on training data.

    Scales are guaranteed positive; constant columns get scale 1 (the fitting
    code warns when that happens).
    """

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float

    def __post_init__(self):
        xm = _frozen(self.x_mean)
        xs = _frozen(self.x_scale)
        if xm.shape != xs.shape or xm.ndim != 1:
            raise InvalidInputError("x_mean and x_scale must be matching 1-D arrays")
        if np.any(xs <= 0) or self.y_scale <= 0:
            raise InvalidInputError("standardization scales must be positive")
        object.__setattr__(self, "x_mean", xm)
        object.__setattr__(self, "x_scale", xs)
        object.__setattr__(self, "y_mean", float(self.y_mean))
        object.__setattr__(self, "y_scale", float(self.y_scale))

    def apply_x(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_scale

    def invert_x(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.x_scale + self.x_mean

    def apply_y(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_scale

    def invert_y(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) * self.y_scale + self.y_mean


def default_zero_tau(xi: SubgradientMatrix | np.ndarray) -> float:
    """Scale-relative threshold below which a subgradient column counts as zero.

    1e-6 relative to max(1, largest |entry|); robust to solver noise on
    standardized data while not swallowing genuinely small slopes.
    """
    v = xi.values if isinstance(xi, SubgradientMatrix) else np.asarray(xi)
    peak = float(np.max(np.abs(v))) if v.size else 0.0
    return 1e-6 * max(1.0, peak)


def support_of(m: SubgradientMatrix, tau: float) -> ActiveSet:
    """Columns whose maximum absolute entry strictly exceeds ``tau``."""
    if not tau >= 0:
        raise InvalidInputError(f"tau must be nonnegative, got {tau}")
    colmax = np.max(np.abs(m.values), axis=0)
    return ActiveSet(tuple(int(k) for k in np.flatnonzero(colmax > tau)))


def l1_lq_norm(m: SubgradientMatrix | np.ndarray, q) -> float:
    """Sum over columns of the per-column lq norm, q in {1, 2, inf}.

    For q=inf this is the column-wise mixed norm whose penalization zeroes
    whole columns; q=1 recovers the plain elementwise l1 norm.
    """
    v = m.values if isinstance(m, SubgradientMatrix) else np.asarray(m, dtype=float)
    if v.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {v.shape}")
    _require_finite(v, "matrix")
    if q == 1:
        per_col = np.sum(np.abs(v), axis=0)
    elif q == 2:
        per_col = np.sqrt(np.sum(v * v, axis=0))
    elif q in (np.inf, float("inf"), "inf"):
        per_col = np.max(np.abs(v), axis=0) if v.shape[0] else np.zeros(v.shape[1])
    else:
        raise InvalidInputError(f"norm order must be 1, 2 or inf, got {q!r}")
    return float(np.sum(per_col))


@dataclass(frozen=True)
class MaxAffineModel:
    """Fitted convex function: max over supporting hyperplanes at the anchors.

    ``theta[i]`` is the fitted value at training point i, ``xi`` the fitted
    subgradients, ``anchors`` a copy of the training inputs.  If a
    ``standardization`` record is present, theta/xi/anchors live in the
    standardized space and predictions are mapped back to original units.
    """

    theta: np.ndarray
    xi: SubgradientMatrix
    anchors: np.ndarray
    standardization: Standardization | None = None
    feas_tol: float = 1e-6
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        theta = _frozen(self.theta)
        anchors = _frozen(self.anchors)
        _require_finite(theta, "theta")
        _require_finite(anchors, "anchors")
        n = len(theta)
        if anchors.shape != (n, self.xi.d) or self.xi.n != n:
            raise InvalidInputError(
                f"inconsistent model shapes: theta {theta.shape}, "
                f"xi {self.xi.values.shape}, anchors {anchors.shape}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "anchors", anchors)
        viol = self.max_convexity_violation()
        if viol > self.feas_tol + 1e-12:
            raise InvalidInputError(
                f"model violates convexity constraints by {viol:.3e} "
                f"(tolerance {self.feas_tol:.3e})")

    @property
    def n(self) -> int:
        return len(self.theta)

    @property
    def d(self) -> int:
        return self.xi.d

    def max_convexity_violation(self) -> float:
        """Largest violation of theta_i + xi_i.(x_j - x_i) <= theta_j over pairs."""
        xi = self.xi.values
        planes = self.theta[:, None] + xi @ self.anchors.T \
            - np.sum(xi * self.anchors, axis=1)[:, None]
        return float(np.max(planes - self.theta[None, :]))

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """Predict at the rows of ``X`` (original units in, original units out)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise InvalidInputError(
                f"input has {X.shape[1]} columns, model expects {self.d}")
        _require_finite(X, "prediction input")
        if self.standardization is not None:
            X = self.standardization.apply_x(X)
        xi = self.xi.values
        offsets = self.theta - np.sum(xi * self.anchors, axis=1)
        vals = np.max(offsets[:, None] + xi @ X.T, axis=0)
        if self.standardization is not None:
            vals = self.standardization.invert_y(vals)
        return vals

    def with_standardization(self, standardization: Standardization) -> "MaxAffineModel":
        return MaxAffineModel(self.theta, self.xi, self.anchors, standardization,
                              self.feas_tol, dict(self.metadata))

    def to_json_dict(self) -> dict:
        std = None
        if self.standardization is not None:
            s = self.standardization
            std = {"x_mean": s.x_mean.tolist(), "x_scale": s.x_scale.tolist(),
                   "y_mean": s.y_mean, "y_scale": s.y_scale}
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "kind": "max_affine_model",
            "theta": self.theta.tolist(),
            "xi": self.xi.values.tolist(),
            "anchors": self.anchors.tolist(),
            "standardization": std,
            "feas_tol": self.feas_tol,
            "metadata": self.metadata,
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MaxAffineModel":
        if doc.get("kind") != "max_affine_model":
            raise InvalidInputError("not a serialized max-affine model")
        std = doc.get("standardization")
        standardization = None
        if std is not None:
            standardization = Standardization(
                np.array(std["x_mean"]), np.array(std["x_scale"]),
                std["y_mean"], std["y_scale"])
        return cls(
            theta=np.array(doc["theta"], dtype=float),
            xi=SubgradientMatrix(np.array(doc["xi"], dtype=float)),
            anchors=np.array(doc["anchors"], dtype=float),
            standardization=standardization,
            feas_tol=float(doc.get("feas_tol", 1e-6)),
            metadata=dict(doc.get("metadata", {})),
        )

    @classmethod
    def load_json(cls, path) -> "MaxAffineModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def predict(model: MaxAffineModel, x: np.ndarray) -> float | np.ndarray:
    """Evaluate the fitted function at ``x`` (a single point or a matrix of rows)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(model.evaluate(x[None, :])[0])
    return model.evaluate(x)


def constant_model(value: float, anchors: np.ndarray,
                   metadata: dict | None = None) -> MaxAffineModel:
    """The flat fit: every theta equal, all subgradients zero."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    n, d = anchors.shape
    return MaxAffineModel(
        theta=np.full(n, float(value)),
        xi=SubgradientMatrix(np.zeros((n, d))),
        anchors=anchors,
        metadata=metadata or {},
    )
