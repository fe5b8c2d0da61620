"""Convex-regression estimators reduced to standard-form QPs.

Every family minimizes half the squared training error over max-affine
functions, subject to the n(n-1) pairwise comparison inequalities that impose
global convexity, plus a sparsity-inducing term on the subgradient matrix:

* ``cnls``           -- no penalty.
* ``lasso1``         -- elementwise l1 penalty on all subgradients.
* ``lasso2``         -- hard l1 bound on each observation's subgradient row.
* ``slasso``         -- column-wise l1/l-inf penalty (zeroes whole columns).
* ``aslasso``        -- the same with data-dependent per-column weights.
* ``relaxed_*``      -- two stages: select columns at penalty level lam, then
                        refit on the selected columns at level lam*gamma.

Norm penalties enter the QP through epigraph variables bounding the relevant
absolute values, so each family stays a quadratic program with linear
inequality constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError, SolverFailure
from .model import (
    ActiveSet,
    Dataset,
    MaxAffineModel,
    SubgradientMatrix,
    constant_model,
    default_zero_tau,
    l1_lq_norm,
    support_of,
)
from .qp import DEFAULT_TOLERANCES, QpProblem, QpSolution, SolveTolerances, solve

FAMILIES = ("cnls", "lasso1", "lasso2", "slasso", "aslasso",
            "relaxed_slasso", "relaxed_aslasso")

WEIGHT_CAP = 1e8  # stand-in for an infinite adaptive weight on a dead column


@dataclass(frozen=True)
class FitSpec:
    """Estimator family plus its tuning parameters and shape options."""

    family: str
    lam: float = 0.0
    gamma: float = 1.0
    c_bound: float | None = None
    weights: np.ndarray | None = None
    monotone: bool = False
    zero_tau: float | None = None
    weights_init: str = "slasso"
    weights_init_frac: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInputError(
                f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not self.lam >= 0:
            raise InvalidInputError(f"lambda must be nonnegative, got {self.lam}")
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidInputError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.family == "lasso2":
            if self.c_bound is None or self.c_bound < 0:
                raise InvalidInputError(
                    "lasso2 requires a nonnegative c_bound")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.ndim != 1 or not np.all(np.isfinite(w)) or np.any(w < 0):
                raise InvalidInputError("weights must be a finite nonnegative vector")
            w = w.copy()
            w.flags.writeable = False
            object.__setattr__(self, "weights", w)
        if self.zero_tau is not None and not self.zero_tau >= 0:
            raise InvalidInputError("zero_tau must be nonnegative")
        if self.weights_init not in ("cnls", "slasso"):
            raise InvalidInputError("weights_init must be 'cnls' or 'slasso'")


@dataclass(frozen=True)
class SolverSummary:
    status: str
    iterations: int
    primal_residual: float
    solve_time: float
    objective: float

    @classmethod
    def from_solution(cls, sol: QpSolution) -> "SolverSummary":
        return cls(sol.status, sol.iterations, sol.primal_residual,
                   sol.solve_time, sol.objective)


@dataclass(frozen=True)
class FitResult:
    model: MaxAffineModel
    active_set: ActiveSet
    spec: FitSpec
    sse: float
    penalty_value: float
    solver: SolverSummary
    stage1_active_set: ActiveSet | None = None
    warnings: tuple[str, ...] = ()


def lambda_max(data: Dataset) -> float:
    """Largest useful penalty level: the l1 norm of X'y.

    Each column contributes the absolute inner product of that column with
    the response; a zero column contributes nothing.
    """
    return float(np.sum(np.abs(data.X.T @ data.y)))


def build_convexity_constraints(X: np.ndarray) -> sp.csr_matrix:
    """The pairwise comparison block: theta_i - theta_j + xi_i.(x_j - x_i) <= 0.

    Exactly n(n-1) rows over the (theta, xi) variables, ordered by i then j
    with the diagonal skipped.  Row r of the returned matrix corresponds to
    the pair (i, j) with r = i*(n-1) + (j if j < i else j - 1).
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n == 1:
        return sp.csr_matrix((0, n + n * d))
    ii = np.repeat(np.arange(n), n - 1)
    jj = np.concatenate([np.delete(np.arange(n), i) for i in range(n)])
    r = n * (n - 1)
    rows = np.arange(r)
    diff = X[jj] - X[ii]
    data = [np.ones(r), -np.ones(r), diff.ravel()]
    rix = [rows, rows, np.repeat(rows, d)]
    cix = [ii, jj, (n + ii[:, None] * d + np.arange(d)[None, :]).ravel()]
    A = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rix), np.concatenate(cix))),
        shape=(r, n + n * d))
    return A.tocsr()


def _pair_row_index(i, j, n):
    return i * (n - 1) + np.where(j < i, j, j - 1)


def _neighbor_rows(X: np.ndarray, k: int | None = None) -> np.ndarray:
    """Initial working rows for lazy constraint generation: each point's
    nearest neighbors, both directions.  At least d+2 neighbors so the
    subgradient block stays determined in the reduced problem."""
    n, d = X.shape
    if n <= 2:
        return np.arange(n * (n - 1))
    if k is None:
        k = min(n - 1, max(d + 2, 8))
    D = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
    np.fill_diagonal(D, np.inf)
    nn = np.argsort(D, axis=1, kind="stable")[:, :k]
    ii = np.repeat(np.arange(n), k)
    jj = nn.ravel()
    rows = np.concatenate([
        _pair_row_index(ii, jj, n),
        _pair_row_index(jj, ii, n),
    ])
    return np.unique(rows)


def _epigraph_block(n: int, d: int, nvar: int, xi_off: int, t_off: int,
                    per_entry: bool) -> sp.coo_matrix:
    """Rows +xi <= t and -xi <= t; t is per-column (shared) or per-entry."""
    iks = np.arange(n * d)
    t_cols = t_off + (iks if per_entry else iks % d)
    rows = np.concatenate([2 * iks, 2 * iks + 1, 2 * iks, 2 * iks + 1])
    cols = np.concatenate([xi_off + iks, xi_off + iks, t_cols, t_cols])
    vals = np.concatenate([np.ones(n * d), -np.ones(n * d), -np.ones(2 * n * d)])
    return sp.coo_matrix((vals, (rows, cols)), shape=(2 * n * d, nvar))


def build_problem(data: Dataset, spec: FitSpec) -> QpProblem:
    """Assemble the QP for a single-stage family (cnls/lasso1/lasso2/slasso)."""
    X, y = data.X, data.y
    n, d = X.shape
    family = spec.family
    if family in ("aslasso",):
        family = "slasso"  # weighted form of the same program
    if family not in ("cnls", "lasso1", "lasso2", "slasso"):
        raise InvalidInputError(f"build_problem does not handle {spec.family!r}")
    if family == "lasso2" and math.isinf(spec.c_bound):
        family = "cnls"  # the row bound can never bind

    if family == "slasso":
        nt = d
    elif family in ("lasso1", "lasso2"):
        nt = n * d
    else:
        nt = 0
    nvar = n + n * d + nt
    xi_off, t_off = n, n + n * d

    conv = build_convexity_constraints(X)
    conv = sp.hstack([conv, sp.csr_matrix((conv.shape[0], nt))]) if nt else conv
    blocks = [conv]
    bs = [np.zeros(conv.shape[0])]
    if family in ("slasso", "lasso1", "lasso2"):
        blocks.append(_epigraph_block(n, d, nvar, xi_off, t_off,
                                      per_entry=family != "slasso"))
        bs.append(np.zeros(2 * n * d))
    if family == "lasso2":
        rr = np.repeat(np.arange(n), d)
        cc = t_off + np.arange(n * d)
        blocks.append(sp.coo_matrix((np.ones(n * d), (rr, cc)), shape=(n, nvar)))
        bs.append(np.full(n, float(spec.c_bound)))
    if spec.monotone:
        iks = np.arange(n * d)
        blocks.append(sp.coo_matrix((-np.ones(n * d), (iks, xi_off + iks)),
                                    shape=(n * d, nvar)))
        bs.append(np.zeros(n * d))

    A = sp.vstack(blocks).tocsc()
    b = np.concatenate(bs)
    P = sp.diags(np.concatenate([np.ones(n), np.zeros(n * d + nt)])).tocsc()
    q = np.zeros(nvar)
    q[:n] = -y
    if family == "slasso":
        w = np.ones(d) if spec.weights is None else np.asarray(spec.weights)
        if len(w) != d:
            raise InvalidInputError(f"weights length {len(w)} != d = {d}")
        q[t_off:] = spec.lam * w
    elif family == "lasso1":
        q[t_off:] = spec.lam

    layout = {"theta": slice(0, n), "xi": slice(xi_off, xi_off + n * d),
              "t": slice(t_off, nvar)}
    return QpProblem(P, q, A, b, var_layout=layout,
                     lazy_rows=slice(0, conv.shape[0]),
                     initial_rows=_neighbor_rows(X))


def compute_adaptive_weights(initial: SubgradientMatrix,
                             zero_tau: float | None = None) -> np.ndarray:
    """Per-column weights: reciprocal l2 norms of the initial subgradients.

    Columns whose norm falls below the zero threshold get the cap weight,
    which effectively excludes the variable while keeping the QP well posed.
    """
    tau = default_zero_tau(initial) if zero_tau is None else zero_tau
    norms = initial.column_norms(2)
    return np.where(norms > tau, 1.0 / np.maximum(norms, 1e-300), WEIGHT_CAP)


def _extract(data: Dataset, spec: FitSpec, problem: QpProblem,
             sol: QpSolution, tol: SolveTolerances,
             columns: np.ndarray | None = None,
             stage1: ActiveSet | None = None,
             warnings_: tuple[str, ...] = ()) -> FitResult:
    n, d = data.n, data.d
    theta = sol.z[problem.var_layout["theta"]]
    xi_small = sol.z[problem.var_layout["xi"]]
    if columns is None:
        xi = xi_small.reshape(n, d)
    else:
        xi = np.zeros((n, d))
        xi[:, columns] = xi_small.reshape(n, len(columns))
    xi_m = SubgradientMatrix(xi)
    tau = spec.zero_tau if spec.zero_tau is not None else default_zero_tau(xi_m)
    model = MaxAffineModel(
        theta=theta, xi=xi_m, anchors=data.X,
        feas_tol=1.05 * tol.eps_feas + 1e-12,
        metadata={"family": spec.family, "lambda": spec.lam,
                  "gamma": spec.gamma if spec.family.startswith("relaxed") else None,
                  "zero_tau": tau,
                  "feature_names": list(data.feature_names) if data.feature_names else None})
    sse = float(np.sum((data.y - theta) ** 2))
    if spec.family in ("slasso", "aslasso", "relaxed_slasso", "relaxed_aslasso"):
        w = np.ones(d)
        if spec.weights is not None:
            w = np.asarray(spec.weights)
        penalty = float(np.sum(w * np.max(np.abs(xi), axis=0)))
    elif spec.family == "lasso1":
        penalty = l1_lq_norm(xi_m, 1)
    else:
        penalty = 0.0
    return FitResult(model=model, active_set=support_of(xi_m, tau), spec=spec,
                     sse=sse, penalty_value=penalty,
                     solver=SolverSummary.from_solution(sol),
                     stage1_active_set=stage1, warnings=warnings_)


def _trivial_fit(data: Dataset, spec: FitSpec,
                 warnings_: tuple[str, ...] = (),
                 stage1: ActiveSet | None = None,
                 value: float | None = None) -> FitResult:
    val = float(data.y[0]) if value is None else value
    model = constant_model(val, data.X, metadata={"family": spec.family})
    sse = float(np.sum((data.y - val) ** 2))
    return FitResult(model=model, active_set=ActiveSet(()), spec=spec,
                     sse=sse, penalty_value=0.0,
                     solver=SolverSummary("optimal", 0, 0.0, 0.0, 0.0),
                     stage1_active_set=stage1, warnings=warnings_)


def _solve_or_raise(problem: QpProblem, tol: SolveTolerances, backend,
                    warm_start=None) -> QpSolution:
    sol = solve(problem, tol, backend=backend, warm_start=warm_start)
    if sol.status == "infeasible":
        # the comparison constraints alone always admit a flat function, so
        # this can only mean the problem was assembled wrong
        raise SolverFailure(
            f"QP reported infeasible ({sol.message}); this indicates a "
            f"problem-construction bug")
    if sol.status != "optimal":
        raise SolverFailure(
            f"QP solve failed: status={sol.status} after {sol.iterations} "
            f"iterations, primal residual {sol.primal_residual:.3e} "
            f"({sol.message})")
    return sol


def fit(data: Dataset, spec: FitSpec, tol: SolveTolerances | None = None,
        backend=None) -> FitResult:
    """Fit any estimator family described by ``spec``."""
    tol = tol or DEFAULT_TOLERANCES
    if data.n == 1:
        return _trivial_fit(data, spec)
    if spec.family.startswith("relaxed"):
        return _fit_relaxed_spec(data, spec, tol, backend)
    if spec.family == "aslasso" and spec.weights is None:
        w = adaptive_weights_for(
            data, weights_init=spec.weights_init, frac=spec.weights_init_frac,
            monotone=spec.monotone, zero_tau=spec.zero_tau,
            tol=tol, backend=backend)
        spec = replace(spec, weights=w)
    problem = build_problem(data, spec)
    sol = _solve_or_raise(problem, tol, backend)
    return _extract(data, spec, problem, sol, tol)


def fit_cnls(data: Dataset, monotone: bool = False,
             tol: SolveTolerances | None = None, backend=None) -> FitResult:
    return fit(data, FitSpec("cnls", monotone=monotone), tol, backend)


def fit_slasso(data: Dataset, lam: float, weights: np.ndarray | None = None,
               monotone: bool = False, tol: SolveTolerances | None = None,
               backend=None) -> FitResult:
    family = "slasso" if weights is None else "aslasso"
    return fit(data, FitSpec(family, lam=lam, weights=weights, monotone=monotone),
               tol, backend)


def fit_lasso1(data: Dataset, lam: float, monotone: bool = False,
               tol: SolveTolerances | None = None, backend=None) -> FitResult:
    return fit(data, FitSpec("lasso1", lam=lam, monotone=monotone), tol, backend)


def fit_lasso2(data: Dataset, c_bound: float, monotone: bool = False,
               tol: SolveTolerances | None = None, backend=None) -> FitResult:
    return fit(data, FitSpec("lasso2", c_bound=c_bound, monotone=monotone),
               tol, backend)


def fit_relaxed(data: Dataset, lam: float, gamma: float,
                weights: np.ndarray | None = None, monotone: bool = False,
                tol: SolveTolerances | None = None, backend=None) -> FitResult:
    family = "relaxed_slasso" if weights is None else "relaxed_aslasso"
    return fit(data, FitSpec(family, lam=lam, gamma=gamma, weights=weights,
                             monotone=monotone), tol, backend)


def adaptive_weights_for(data: Dataset, *, weights_init: str = "slasso",
                         frac: float = 0.1, monotone: bool = False,
                         zero_tau: float | None = None,
                         tol: SolveTolerances | None = None,
                         backend=None) -> np.ndarray:
    """Weights from an initial estimator fit on this data.

    ``weights_init='cnls'`` uses the unpenalized fit.  The default uses a
    column-penalized fit at a small fraction of the largest useful penalty,
    which separates live from dead columns far more sharply than the
    unpenalized fit (whose subgradients are not unique and carry noise in
    every column).
    """
    tol = tol or DEFAULT_TOLERANCES
    if weights_init == "cnls":
        init = fit_cnls(data, monotone=monotone, tol=tol, backend=backend)
    else:
        lam0 = frac * lambda_max(data)
        init = fit(data, FitSpec("slasso", lam=lam0, monotone=monotone),
                   tol, backend)
    return compute_adaptive_weights(init.model.xi, zero_tau)


def _restricted_dataset(data: Dataset, columns: np.ndarray) -> Dataset:
    names = None
    if data.feature_names is not None:
        names = tuple(data.feature_names[k] for k in columns)
    return Dataset(data.X[:, columns], data.y, names)


def _fit_relaxed_spec(data: Dataset, spec: FitSpec, tol, backend) -> FitResult:
    base = "aslasso" if spec.family == "relaxed_aslasso" else "slasso"
    weights = spec.weights
    if base == "aslasso" and weights is None:
        weights = adaptive_weights_for(
            data, weights_init=spec.weights_init, frac=spec.weights_init_frac,
            monotone=spec.monotone, zero_tau=spec.zero_tau,
            tol=tol, backend=backend)
        spec = replace(spec, weights=weights)
    stage1_spec = FitSpec(base, lam=spec.lam, weights=weights,
                          monotone=spec.monotone, zero_tau=spec.zero_tau)
    stage1 = fit(data, stage1_spec, tol, backend)
    return _second_stage(data, spec, stage1.active_set, tol, backend)


def _second_stage(data: Dataset, spec: FitSpec, selected: ActiveSet,
                  tol, backend) -> FitResult:
    """Refit on the selected columns with the penalty scaled by gamma."""
    columns = np.array(selected.indices, dtype=int)
    if len(columns) == 0:
        mean = float(np.mean(data.y))
        return _trivial_fit(
            data, spec, warnings_=("empty active set: returning the "
                                   "constant-mean model",),
            stage1=selected, value=mean)
    sub = _restricted_dataset(data, columns)
    w_sub = None
    if spec.weights is not None:
        w_sub = np.asarray(spec.weights)[columns]
    stage2_spec = FitSpec("slasso" if w_sub is None else "aslasso",
                          lam=spec.lam * spec.gamma, weights=w_sub,
                          monotone=spec.monotone, zero_tau=spec.zero_tau)
    problem = build_problem(sub, stage2_spec)
    sol = _solve_or_raise(problem, tol, backend)
    return _extract(data, spec, problem, sol, tol, columns=columns,
                    stage1=selected)


def fit_path(data: Dataset, family: str, lams, *, gammas=None,
             weights: np.ndarray | None = None, monotone: bool = False,
             zero_tau: float | None = None,
             weights_init: str = "slasso", weights_init_frac: float = 0.1,
             tol: SolveTolerances | None = None, backend=None,
             skip_failures: bool = False):
    """Fit a whole penalty path, reusing structure between adjacent solves.

    ``lams`` should be descending.  The comparison-constraint working set and
    the previous solution warm-start each step, which makes a 50-point path
    far cheaper than 50 cold solves.  For relaxed families, ``gammas``
    controls the second-stage grid and the result is a dict keyed by
    (lam_index, gamma_index); otherwise a list indexed like ``lams``.

    With ``skip_failures`` set, a failed solve yields None for the affected
    cells instead of raising; cross-validation uses this to mark cells
    invalid without abandoning the rest of the path.
    """
    tol = tol or DEFAULT_TOLERANCES
    lams = np.asarray(list(lams), dtype=float)
    relaxed = family.startswith("relaxed")
    if relaxed and gammas is None:
        raise InvalidInputError("relaxed families need a gamma grid")
    base = {"relaxed_slasso": "slasso", "relaxed_aslasso": "aslasso"}.get(family, family)
    if base == "aslasso" and weights is None:
        weights = adaptive_weights_for(
            data, weights_init=weights_init, frac=weights_init_frac,
            monotone=monotone, zero_tau=zero_tau, tol=tol, backend=backend)

    if data.n == 1:
        spec0 = FitSpec(family, lam=float(lams[0]), monotone=monotone)
        if relaxed:
            return {(li, gi): _trivial_fit(data, spec0)
                    for li in range(len(lams)) for gi in range(len(gammas))}
        return [_trivial_fit(data, spec0) for _ in lams]

    n, d = data.n, data.d
    results = {} if relaxed else []
    prev_sol = None
    rows_hint = None
    base_neighbors = None
    stage2_state: dict = {}
    for li, lam in enumerate(lams):
        if family == "lasso2":
            spec = FitSpec("lasso2", c_bound=float(lam), monotone=monotone,
                           zero_tau=zero_tau)
        else:
            spec = FitSpec(base, lam=float(lam), weights=weights,
                           monotone=monotone, zero_tau=zero_tau)
        problem = build_problem(data, spec)
        if base_neighbors is None:
            base_neighbors = problem.initial_rows
        if rows_hint is not None:
            problem = replace(problem, initial_rows=rows_hint)
        try:
            sol = _solve_or_raise(problem, tol, backend, warm_start=prev_sol)
        except SolverFailure:
            if not skip_failures:
                raise
            if relaxed:
                for gi in range(len(gammas)):
                    results[(li, gi)] = None
            else:
                results.append(None)
            continue
        prev_sol = sol
        # continue from the rows the wrapper actually carried, trimmed back
        # toward the currently-binding ones so degenerate segments (the flat
        # fit makes every pairwise row tight) do not snowball the working set
        lazy = problem.lazy_rows
        carried = sol.working_rows if sol.working_rows is not None else \
            np.asarray(problem.initial_rows, dtype=int)
        cap = 25 * n
        if len(carried) > cap:
            A_lazy = problem.A.tocsr()[lazy]
            slack = problem.b[lazy] - A_lazy @ sol.z
            order = np.argsort(slack[carried], kind="stable")
            carried = np.sort(carried[order[:cap]])
        rows_hint = np.unique(np.concatenate([base_neighbors, carried]))
        if relaxed:
            r1 = _extract(data, spec, problem, sol, tol)
            _relaxed_gamma_path(data, family, float(lam), gammas, weights,
                                monotone, zero_tau, r1.active_set,
                                tol, backend, skip_failures, results, li,
                                stage2_state)
        else:
            results.append(_extract(data, spec, problem, sol, tol))
    return results


def _relaxed_gamma_path(data, family, lam, gammas, weights, monotone, zero_tau,
                        selected, tol, backend, skip_failures, results, li,
                        state):
    """Second-stage sweep over gamma on one restricted problem.

    The restricted program depends on the selected columns only through its
    structure and on (lam * gamma) only through the linear cost, so per
    support set we keep one assembled problem, warm-start each gamma from the
    same cell of the previous lambda, and reuse solutions outright when two
    cells share the same effective penalty product.
    """
    columns = tuple(selected.indices)
    order = sorted(range(len(gammas)), key=lambda gi: -gammas[gi])
    if len(columns) == 0:
        mean = float(np.mean(data.y))
        for gi in order:
            spec_g = FitSpec(family, lam=lam, gamma=float(gammas[gi]),
                             weights=weights, monotone=monotone,
                             zero_tau=zero_tau)
            results[(li, gi)] = _trivial_fit(
                data, spec_g, warnings_=("empty active set: returning the "
                                         "constant-mean model",),
                stage1=selected, value=mean)
        return

    entry = state.get(columns)
    if entry is None:
        cols = np.array(columns, dtype=int)
        sub = _restricted_dataset(data, cols)
        w_sub = np.asarray(weights)[cols] if weights is not None else None
        base_spec = FitSpec("slasso" if w_sub is None else "aslasso",
                            lam=lam, weights=w_sub,
                            monotone=monotone, zero_tau=zero_tau)
        problem = build_problem(sub, base_spec)
        entry = {"problem": problem, "cols": cols,
                 "w_vec": np.ones(len(cols)) if w_sub is None else w_sub,
                 "sols": {}, "rows": {}, "by_product": {}}
        state[columns] = entry
    problem = entry["problem"]
    t_slice = problem.var_layout["t"]
    prev = None
    for gi in order:
        gamma = float(gammas[gi])
        product = lam * gamma
        spec_g = FitSpec(family, lam=lam, gamma=gamma, weights=weights,
                         monotone=monotone, zero_tau=zero_tau)
        cached = entry["by_product"].get(product)
        if cached is not None:
            results[(li, gi)] = replace(cached, spec=spec_g)
            continue
        q = problem.q.copy()
        q[t_slice] = product * entry["w_vec"]
        rows_hint = entry["rows"].get(gi, problem.initial_rows)
        prob_g = replace(problem, q=q, initial_rows=rows_hint)
        warm = entry["sols"].get(gi, prev)
        try:
            sol = _solve_or_raise(prob_g, tol, backend, warm_start=warm)
        except SolverFailure:
            if not skip_failures:
                raise
            results[(li, gi)] = None
            continue
        prev = sol
        entry["sols"][gi] = sol
        if sol.working_rows is not None:
            entry["rows"][gi] = np.unique(np.concatenate(
                [problem.initial_rows, sol.working_rows]))
        res = _extract(data, spec_g, prob_g, sol, tol,
                       columns=entry["cols"], stage1=selected)
        entry["by_product"][product] = res
        results[(li, gi)] = res
