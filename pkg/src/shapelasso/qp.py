"""Standard-form quadratic programs and solver backends.

Problems are ``min 0.5 z'Pz + q'z  s.t.  Az <= b``.  Two backends share one
contract: a self-contained first-order operator-splitting solver (alternating
proximal/projection iterations with over-relaxation, followed by an
active-set polish), and an optional adapter around the cvxopt interior-point
solver for large instances.  Every accepted solution is verified against the
full problem's KKT residuals, so callers can rely on ``status == "optimal"``
implying the stated feasibility and stationarity tolerances.

Estimator-built problems mark their pairwise-comparison constraint block as
lazily generated: the wrapper solves with a working subset of those rows and
grows it until no row is violated, which is much faster than carrying all
n(n-1) rows through the solver.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidInputError, OracleSizeError, SolverFailure

_DENSE_SCHUR_LIMIT = 3000  # above this many variables, factor the sparse KKT instead


@dataclass(frozen=True)
class SolveTolerances:
    """Feasibility / stationarity targets and the iteration budget."""

    eps_feas: float = 1e-6
    eps_kkt: float = 1e-6
    max_iter: int = 200_000


DEFAULT_TOLERANCES = SolveTolerances()


@dataclass(frozen=True)
class QpProblem:
    """Inequality-form QP with named variable blocks.

    ``var_layout`` maps block names (e.g. "theta", "xi", "t") to slices of z.
    ``lazy_rows`` optionally marks a contiguous block of rows of A that the
    solve wrapper may activate on demand; ``initial_rows`` are the row indices
    (within that block) to start from.
    """

    P: sp.csc_matrix
    q: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    var_layout: dict = field(default_factory=dict)
    lazy_rows: slice | None = None
    initial_rows: np.ndarray | None = None

    def __post_init__(self):
        P = sp.csc_matrix(self.P)
        A = sp.csc_matrix(self.A)
        q = np.asarray(self.q, dtype=float)
        b = np.asarray(self.b, dtype=float)
        m = len(q)
        if P.shape != (m, m):
            raise InvalidInputError(f"P shape {P.shape} does not match q length {m}")
        if A.shape != (len(b), m):
            raise InvalidInputError(f"A shape {A.shape} does not match b/q")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(b))
                and np.all(np.isfinite(P.data)) and np.all(np.isfinite(A.data))):
            raise InvalidInputError("problem data contains non-finite entries")
        asym = abs(P - P.T)
        if asym.nnz and asym.max() > 1e-12:
            raise InvalidInputError("P must be symmetric within 1e-12")
        if A.shape[0]:
            row_nnz = np.diff(A.tocsr().indptr)
            if np.any(row_nnz == 0):
                raise InvalidInputError("A has empty rows")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def num_vars(self) -> int:
        return len(self.q)

    @property
    def num_constraints(self) -> int:
        return len(self.b)

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ (self.P @ z) + self.q @ z)


@dataclass(frozen=True)
class QpSolution:
    z: np.ndarray
    objective: float
    primal_residual: float
    status: str  # optimal | max_iter | infeasible
    iterations: int
    solve_time: float
    duals: np.ndarray | None = None
    message: str = ""
    # rows of the lazily-generated block that the solve actually carried;
    # callers sweeping a parameter path feed these back as initial_rows
    working_rows: np.ndarray | None = None


def kkt_residuals(problem: QpProblem, z: np.ndarray, duals: np.ndarray) -> dict:
    """Max-norm residuals of the three KKT blocks for an inequality QP."""
    z = np.asarray(z, dtype=float)
    duals = np.asarray(duals, dtype=float)
    if len(z) != problem.num_vars or len(duals) != problem.num_constraints:
        raise InvalidInputError("z/duals dimensions do not match the problem")
    slack = problem.A @ z - problem.b
    stat = problem.P @ z + problem.q + problem.A.T @ duals
    return {
        "stationarity": float(np.max(np.abs(stat))) if len(stat) else 0.0,
        "primal": float(np.max(np.maximum(slack, 0.0))) if len(slack) else 0.0,
        "complementarity": float(np.max(np.abs(duals * slack))) if len(slack) else 0.0,
    }


def _relative_stationarity(problem, z, duals) -> float:
    Pz = problem.P @ z
    Atmu = problem.A.T @ duals if problem.num_constraints else np.zeros_like(z)
    num = np.max(np.abs(Pz + problem.q + Atmu))
    den = max(1.0, np.max(np.abs(Pz)), np.max(np.abs(problem.q)),
              np.max(np.abs(Atmu)) if len(Atmu) else 0.0)
    return float(num / den)


def _verify(problem, z, duals, tol) -> tuple[bool, float, float]:
    r = problem.A @ z - problem.b if problem.num_constraints else np.zeros(0)
    primal = float(np.max(np.maximum(r, 0.0))) if len(r) else 0.0
    stat = _relative_stationarity(problem, z, duals)
    return primal <= tol.eps_feas and stat <= tol.eps_kkt, primal, stat


def _polish(problem: QpProblem, z: np.ndarray, duals: np.ndarray,
            tol: SolveTolerances, reg: float = 1e-9):
    """Equality-KKT refinement on the detected active set.

    Solves the reduced KKT system with tiny regularization plus iterative
    refinement; returns (z, duals) only if the refined point verifies the
    full-problem KKT conditions, else None.
    """
    m = problem.num_vars
    r = problem.num_constraints
    if r == 0:
        K = (problem.P + reg * sp.eye(m)).tocsc()
        try:
            lu = spla.splu(K)
        except RuntimeError:
            return None
        zp = lu.solve(-problem.q)
        for _ in range(3):
            resid = -problem.q - problem.P @ zp
            zp = zp + lu.solve(resid)
        mu = np.zeros(0)
        ok, _, _ = _verify(problem, zp, mu, tol)
        return (zp, mu) if ok else None

    slack = problem.b - problem.A @ z
    sscale = max(1.0, float(np.max(np.abs(problem.b))))
    dscale = max(1.0, float(np.max(duals)) if len(duals) else 1.0)
    # rows within the current residual scale of being tight count as active
    rp = float(np.max(np.maximum(-slack, 0.0)))
    slack_cut = max(1e-7 * sscale, 5.0 * rp)
    active = (duals > 1e-7 * dscale) | (slack < slack_cut)
    if int(active.sum()) > 1.5 * m + 50:
        # heavily degenerate face (e.g. the flat fit, where every pairwise
        # comparison is tight): refining it costs more than it is worth
        return None
    A_csr = problem.A.tocsr()

    for _ in range(4):
        idx = np.flatnonzero(active)
        na = len(idx)
        Aact = A_csr[idx]
        K0 = sp.bmat([[problem.P, Aact.T],
                      [Aact, None]], format="csc")
        Kreg = sp.bmat([[problem.P + reg * sp.eye(m), Aact.T],
                        [Aact, -reg * sp.eye(na) if na else None]], format="csc")
        rhs = np.concatenate([-problem.q, problem.b[idx]])
        try:
            lu = spla.splu(Kreg)
        except RuntimeError:
            return None
        sol = lu.solve(rhs)
        # refine away the regularization bias; when the unregularized system
        # is singular (weakly active rows, flat directions) the refinement
        # drifts, so keep the best iterate instead of the last
        best = sol
        best_res = float(np.max(np.abs(K0 @ sol - rhs)))
        for _ in range(3):
            sol = sol + lu.solve(rhs - K0 @ sol)
            res = float(np.max(np.abs(K0 @ sol - rhs)))
            if not np.isfinite(res):
                break
            if res < best_res:
                best, best_res = sol, res
        sol = best
        if not np.all(np.isfinite(sol)):
            return None
        zp = sol[:m]
        mu_act = sol[m:]
        neg = mu_act < -1e-7 * max(1.0, np.max(np.abs(mu_act)) if na else 1.0)
        if np.any(neg):
            active = active.copy()
            active[idx[neg]] = False
            continue
        mu = np.zeros(r)
        mu[idx] = np.maximum(mu_act, 0.0)
        ok, _, _ = _verify(problem, zp, mu, tol)
        if ok:
            return zp, mu
        # a violated inactive row means the active set was too small
        viol = problem.A @ zp - problem.b
        worst = np.flatnonzero(viol > tol.eps_feas)
        if len(worst) == 0:
            return None
        active = active.copy()
        active[worst] = True
    return None


class AdmmBackend:
    """First-order operator-splitting solver with over-relaxation.

    Alternates a regularized proximal step on the quadratic objective with a
    projection of the constraint image onto {s <= b}, over-relaxed dual
    ascent, and adaptive penalty rescaling.  A deterministic iteration
    schedule is used throughout: given the same problem and tolerances, the
    returned solution is bitwise reproducible.
    """

    name = "builtin"

    def __init__(self, sigma: float = 1e-6, rho: float = 0.1, alpha: float = 1.6,
                 check_every: int = 25):
        self.sigma = sigma
        self.rho0 = rho
        self.alpha = alpha
        self.check_every = check_every

    def solve(self, problem: QpProblem, tol: SolveTolerances = DEFAULT_TOLERANCES,
              warm_start: QpSolution | None = None) -> QpSolution:
        t0 = time.perf_counter()
        m = problem.num_vars
        r = problem.num_constraints
        A = problem.A.tocsr()
        At = A.T.tocsr()
        b = problem.b
        dense = m <= _DENSE_SCHUR_LIMIT
        P_dense = problem.P.toarray() if dense else None
        AtA = (At @ A).toarray() if dense and r else None
        rho = self.rho0
        alpha = self.alpha
        sigma = self.sigma

        factor = self._make_factor(problem, P_dense, AtA, rho, sigma, dense)

        if warm_start is not None and len(warm_start.z) == m:
            x = warm_start.z.copy()
            w = warm_start.duals.copy() if warm_start.duals is not None and \
                len(warm_start.duals) == r else np.zeros(r)
            s = np.minimum(A @ x, b) if r else np.zeros(0)
        else:
            x = np.zeros(m)
            s = np.zeros(r)
            w = np.zeros(r)

        if r == 0:
            pol = _polish(problem, x, np.zeros(0), tol)
            if pol is not None:
                zp, mu = pol
                return self._finish(problem, zp, mu, tol, 0, t0, "optimal")

        it = 0
        w_prev = w.copy()
        infeas_hits = 0
        next_polish = 500
        status = "max_iter"
        message = ""
        while it < tol.max_iter:
            for _ in range(self.check_every):
                rhs = sigma * x - problem.q + At @ (rho * s - w)
                xt = factor(rhs)
                zt = A @ xt
                x = alpha * xt + (1.0 - alpha) * x
                v = alpha * zt + (1.0 - alpha) * s
                s_new = np.minimum(v + w / rho, b)
                w = w + rho * (v - s_new)
                s = s_new
                it += 1
            Ax = A @ x
            rp = float(np.max(np.abs(Ax - s))) if r else 0.0
            Pz = P_dense @ x if dense else problem.P @ x
            Atw = At @ w if r else np.zeros(m)
            rd = float(np.max(np.abs(Pz + problem.q + Atw)))
            rp_rel = rp / max(1.0, float(np.max(np.abs(Ax))) if r else 0.0,
                              float(np.max(np.abs(s))) if r else 0.0)
            rd_rel = rd / max(1.0, float(np.max(np.abs(Pz))),
                              float(np.max(np.abs(problem.q))),
                              float(np.max(np.abs(Atw))))
            converged = rp_rel <= tol.eps_feas and rd_rel <= tol.eps_kkt
            if converged or it >= next_polish and rp_rel <= 1e-4:
                pol = _polish(problem, x, w, tol)
                if pol is not None:
                    zp, mu = pol
                    return self._finish(problem, zp, mu, tol, it, t0, "optimal")
                next_polish = it + 500
            if converged:
                ok, _, _ = _verify(problem, x, w, tol)
                if ok:
                    return self._finish(problem, x, w, tol, it, t0, "optimal")
            # primal infeasibility certificate
            dy = np.maximum(w - w_prev, 0.0)
            ny = float(np.max(dy)) if r else 0.0
            if ny > 1e-12:
                if float(np.max(np.abs(At @ dy))) <= 1e-7 * ny and \
                        float(b @ dy) < -1e-7 * ny:
                    infeas_hits += 1
                    if infeas_hits >= 2:
                        status = "infeasible"
                        message = "primal infeasibility certificate found"
                        break
                else:
                    infeas_hits = 0
            w_prev = w.copy()
            # adaptive penalty: rebalance primal vs dual progress
            if it % 100 == 0 and r:
                ratio = np.sqrt(max(rp_rel, 1e-16) / max(rd_rel, 1e-16))
                if ratio > 5.0 or ratio < 0.2:
                    rho = float(np.clip(rho * ratio, 1e-6, 1e6))
                    factor = self._make_factor(problem, P_dense, AtA, rho, sigma, dense)

        if status != "infeasible":
            pol = _polish(problem, x, w, tol)
            if pol is not None:
                zp, mu = pol
                return self._finish(problem, zp, mu, tol, it, t0, "optimal")
            ok, _, _ = _verify(problem, x, w, tol)
            if ok:
                return self._finish(problem, x, w, tol, it, t0, "optimal")
            message = "iteration budget exhausted before reaching tolerances"
        return self._finish(problem, x, w, tol, it, t0, status, message)

    def _make_factor(self, problem, P_dense, AtA, rho, sigma, dense):
        m = problem.num_vars
        if dense:
            K = P_dense + sigma * np.eye(m)
            if AtA is not None:
                K = K + rho * AtA
            chol = sla.cho_factor(K, lower=True, check_finite=False)
            return lambda rhs: sla.cho_solve(chol, rhs, check_finite=False)
        r = problem.num_constraints
        if r == 0:
            lu0 = spla.splu((problem.P + sigma * sp.eye(m)).tocsc())
            return lu0.solve
        K = sp.bmat([
            [problem.P + sigma * sp.eye(m), problem.A.T],
            [problem.A, -sp.eye(r) / rho],
        ], format="csc")
        lu = spla.splu(K)
        zeros = np.zeros(r)

        # with the second rhs block zero, the KKT solve reduces exactly to
        # (P + sigma I + rho A'A) x = rhs, which is what the iteration needs
        def factor(rhs):
            return lu.solve(np.concatenate([rhs, zeros]))[:m]

        return factor

    def _finish(self, problem, z, duals, tol, iters, t0, status, message=""):
        res = kkt_residuals(problem, z, duals if duals is not None else
                            np.zeros(problem.num_constraints))
        return QpSolution(
            z=z, objective=problem.objective(z),
            primal_residual=res["primal"], status=status, iterations=iters,
            solve_time=time.perf_counter() - t0, duals=duals, message=message)


class CvxoptBackend:
    """Adapter around the cvxopt interior-point QP solver.

    Solutions are post-polished on the detected active set and verified
    against the same KKT contract as the built-in backend.  Degenerate
    problems (rank-deficient because some variables have zero quadratic cost
    and too few covering constraints) are retried with a tiny diagonal ridge;
    the returned point is still verified against the unmodified problem.
    """

    name = "external"

    def __init__(self, abstol: float = 1e-8, reltol: float = 1e-8,
                 feastol: float = 1e-8, maxiters: int = 200):
        try:
            import cvxopt  # noqa: F401
        except ImportError as exc:
            raise SolverFailure(
                "external backend requires the cvxopt package") from exc
        self.options = {"show_progress": False, "abstol": abstol,
                        "reltol": reltol, "feastol": feastol,
                        "maxiters": maxiters, "refinement": 2}

    def solve(self, problem: QpProblem, tol: SolveTolerances = DEFAULT_TOLERANCES,
              warm_start: QpSolution | None = None) -> QpSolution:
        from cvxopt import matrix, solvers, spmatrix

        t0 = time.perf_counter()
        m = problem.num_vars
        r = problem.num_constraints

        def to_sp(M):
            C = M.tocoo()
            return spmatrix(C.data, C.row.astype(int), C.col.astype(int), M.shape)

        saved = dict(solvers.options)
        solvers.options.update(self.options)
        try:
            sol = None
            last_err = None
            for ridge in (0.0, 1e-9, 1e-7):
                P = problem.P if ridge == 0.0 else \
                    (problem.P + ridge * sp.eye(m)).tocsc()
                try:
                    if r:
                        sol = solvers.qp(to_sp(P), matrix(problem.q),
                                         to_sp(problem.A), matrix(problem.b))
                    else:
                        sol = solvers.qp(to_sp(P), matrix(problem.q))
                    break
                except (ValueError, ArithmeticError, ZeroDivisionError) as exc:
                    last_err = exc
            if sol is None:
                raise SolverFailure(f"cvxopt failed: {last_err}")
        finally:
            solvers.options.clear()
            solvers.options.update(saved)

        iters = int(sol.get("iterations", 0))
        if sol["status"] == "primal infeasible":
            z = np.zeros(m)
            return QpSolution(z=z, objective=problem.objective(z),
                              primal_residual=np.inf, status="infeasible",
                              iterations=iters, solve_time=time.perf_counter() - t0,
                              duals=None, message="cvxopt: primal infeasible")
        z = np.array(sol["x"]).ravel()
        duals = np.maximum(np.array(sol["z"]).ravel(), 0.0) if r else np.zeros(0)

        # active-set refinement pays off only on small systems; large
        # comparison-constrained problems are too degenerate for it
        if m + r <= 2500:
            pol = _polish(problem, z, duals, tol)
            if pol is not None:
                z, duals = pol
        res = kkt_residuals(problem, z, duals)
        ok, primal, _ = _verify(problem, z, duals, tol)
        status = "optimal" if ok else "max_iter"
        message = "" if ok else f"cvxopt status {sol['status']}, contract not met"
        return QpSolution(z=z, objective=problem.objective(z),
                          primal_residual=res["primal"], status=status,
                          iterations=iters, solve_time=time.perf_counter() - t0,
                          duals=duals, message=message)


_BACKENDS = {"builtin": AdmmBackend, "external": CvxoptBackend}


def get_backend(backend=None):
    """Resolve a backend instance from a name, an instance, or the environment."""
    if backend is None:
        backend = os.environ.get("SHAPELASSO_BACKEND", "builtin")
    if isinstance(backend, str):
        try:
            return _BACKENDS[backend]()
        except KeyError:
            raise InvalidInputError(
                f"unknown backend {backend!r}; expected one of {sorted(_BACKENDS)}")
    return backend


def _subproblem(problem: QpProblem, rows: np.ndarray) -> QpProblem:
    A = sp.csc_matrix(problem.A.tocsr()[rows])
    return QpProblem(problem.P, problem.q, A, problem.b[rows],
                     var_layout=problem.var_layout)


def solve(problem: QpProblem, tol: SolveTolerances | None = None,
          backend=None, warm_start: QpSolution | None = None,
          max_rounds: int = 30) -> QpSolution:
    """Solve a QP, activating lazily-generated rows on demand.

    When ``problem.lazy_rows`` is set, the solver starts from
    ``problem.initial_rows`` within that block and alternates solving the
    reduced problem with scanning the full block for violated rows, until the
    full problem is feasible at the working solution.  Duals of never-active
    rows are zero, so the returned solution satisfies the full KKT system.
    """
    tol = tol or DEFAULT_TOLERANCES
    backend = get_backend(backend)
    if problem.lazy_rows is None:
        return backend.solve(problem, tol, warm_start=warm_start)

    r = problem.num_constraints
    lazy = problem.lazy_rows
    fixed = np.concatenate([np.arange(0, lazy.start), np.arange(lazy.stop, r)])
    if problem.initial_rows is not None:
        working = np.unique(np.asarray(problem.initial_rows, dtype=int))
    else:
        working = np.arange(lazy.start, lazy.stop)
    A_lazy = problem.A.tocsr()[lazy]
    b_lazy = problem.b[lazy]
    # solve the reduced problems a bit tighter than the acceptance threshold
    # so the violation scan does not churn on rows at the noise level
    sub_tol = replace(tol, eps_feas=0.5 * tol.eps_feas)
    t0 = time.perf_counter()
    total_iters = 0
    sub_sol = None
    for _ in range(max_rounds):
        rows = np.sort(np.concatenate([fixed, working]))
        sub = _subproblem(problem, rows)
        warm = None
        if sub_sol is not None:
            warm = replace(sub_sol, duals=None)
        sub_sol = backend.solve(sub, sub_tol, warm_start=warm)
        total_iters += sub_sol.iterations
        if sub_sol.status == "infeasible":
            return replace(sub_sol, iterations=total_iters,
                           solve_time=time.perf_counter() - t0)
        viol = A_lazy @ sub_sol.z - b_lazy
        bad = np.flatnonzero(viol > tol.eps_feas)
        if len(bad) == 0:
            break
        order = np.argsort(-viol[bad], kind="stable")
        new = lazy.start + bad[order[:5000]]
        working = np.unique(np.concatenate([working, new]))
    else:
        raise SolverFailure("row generation did not settle within max_rounds")

    duals = np.zeros(r)
    if sub_sol.duals is not None:
        duals[rows] = sub_sol.duals
    res = kkt_residuals(problem, sub_sol.z, duals)
    ok, primal, _ = _verify(problem, sub_sol.z, duals, tol)
    if ok:
        status = "optimal"
    elif sub_sol.status == "optimal":
        status = "max_iter"  # contract met on the subproblem but not the full one
    else:
        status = sub_sol.status
    return QpSolution(z=sub_sol.z, objective=problem.objective(sub_sol.z),
                      primal_residual=res["primal"], status=status,
                      iterations=total_iters,
                      solve_time=time.perf_counter() - t0,
                      duals=duals, message=sub_sol.message,
                      working_rows=working)


def _feasible_point(problem: QpProblem):
    """Phase-1 LP: find a feasible point or certify infeasibility."""
    from scipy.optimize import linprog

    m = problem.num_vars
    r = problem.num_constraints
    if r == 0:
        return np.zeros(m)
    # minimize t  s.t.  Az - t <= b, t >= 0
    A = sp.hstack([problem.A, -np.ones((r, 1))]).tocsc()
    c = np.zeros(m + 1)
    c[-1] = 1.0
    bounds = [(None, None)] * m + [(0, None)]
    res = linprog(c, A_ub=A, b_ub=problem.b, bounds=bounds, method="highs")
    if not res.success or res.x is None:
        return None
    if res.x[-1] > 1e-7:
        return None
    return res.x[:m]


def _active_set_ls(problem: QpProblem, x0: np.ndarray, max_rounds: int = 200):
    """Exact finisher: iterate equality-constrained least squares over
    candidate active sets, adding violated rows and dropping negative duals."""
    m = problem.num_vars
    r = problem.num_constraints
    A = problem.A.toarray() if r else np.zeros((0, m))
    b = problem.b
    P = problem.P.toarray()
    slack = b - A @ x0 if r else np.zeros(0)
    active = slack < 1e-7 * max(1.0, float(np.max(np.abs(b))) if r else 1.0)
    for _ in range(max_rounds):
        idx = np.flatnonzero(active)
        na = len(idx)
        K = np.zeros((m + na, m + na))
        K[:m, :m] = P
        if na:
            K[:m, m:] = A[idx].T
            K[m:, :m] = A[idx]
        rhs = np.concatenate([-problem.q, b[idx]])
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        z = sol[:m]
        mu_act = sol[m:]
        # check the KKT system was actually solved (rank-deficient K can
        # leave residual when the active set is inconsistent)
        if np.max(np.abs(K @ sol - rhs)) > 1e-7 * max(1.0, np.max(np.abs(rhs))):
            return None
        viol = A @ z - b if r else np.zeros(0)
        worst = int(np.argmax(viol)) if r else -1
        if r and viol[worst] > 1e-9 * max(1.0, float(np.max(np.abs(b)))):
            if active[worst]:
                return None
            active[worst] = True
            continue
        if na and np.min(mu_act) < -1e-9 * max(1.0, float(np.max(np.abs(mu_act)))):
            drop = idx[int(np.argmin(mu_act))]
            active[drop] = False
            continue
        duals = np.zeros(r)
        if na:
            duals[idx] = np.maximum(mu_act, 0.0)
        return z, duals
    return None


def oracle_solve(problem: QpProblem, tol: SolveTolerances | None = None) -> QpSolution:
    """Independent reference solver for tiny instances (m <= 40, r <= 200).

    Uses an LP feasibility phase, a sequential quadratic programming run, and
    an exact active-set least-squares finisher; shares no code path with the
    iterative backends.
    """
    tol = tol or DEFAULT_TOLERANCES
    m = problem.num_vars
    r = problem.num_constraints
    if m > 40 or r > 200:
        raise OracleSizeError(
            f"oracle refuses instances larger than 40 vars / 200 rows "
            f"(got {m} vars, {r} rows)")
    t0 = time.perf_counter()

    x0 = _feasible_point(problem)
    if x0 is None:
        z = np.zeros(m)
        return QpSolution(z=z, objective=problem.objective(z),
                          primal_residual=np.inf, status="infeasible",
                          iterations=0, solve_time=time.perf_counter() - t0,
                          duals=None, message="phase-1 LP infeasible")

    from scipy.optimize import minimize

    P = problem.P.toarray()
    A = problem.A.toarray() if r else np.zeros((0, m))

    def fun(z):
        return 0.5 * z @ P @ z + problem.q @ z

    def jac(z):
        return P @ z + problem.q

    constraints = []
    if r:
        constraints.append({"type": "ineq",
                            "fun": lambda z: problem.b - A @ z,
                            "jac": lambda z: -A})
    try:
        res = minimize(fun, x0, jac=jac, method="SLSQP", constraints=constraints,
                       options={"maxiter": 1000, "ftol": 1e-12})
        x = res.x if np.all(np.isfinite(res.x)) else x0
    except Exception:
        x = x0
    finish = _active_set_ls(problem, x)
    if finish is None:
        res = minimize(fun, x0, jac=jac, method="trust-constr",
                       constraints=[{"type": "ineq",
                                     "fun": lambda z: problem.b - A @ z,
                                     "jac": lambda z: -A}] if r else [],
                       options={"maxiter": 5000, "gtol": 1e-12, "xtol": 1e-14})
        finish = _active_set_ls(problem, res.x)
    if finish is None:
        raise SolverFailure("oracle could not certify an optimal active set")
    z, duals = finish
    res_k = kkt_residuals(problem, z, duals)
    return QpSolution(z=z, objective=problem.objective(z),
                      primal_residual=res_k["primal"], status="optimal",
                      iterations=0, solve_time=time.perf_counter() - t0,
                      duals=duals)


def write_problem_text(problem: QpProblem, path) -> None:
    """Dump a problem as plain-text coordinate triplets for external debugging.

    Format: a header line ``qp <num_vars> <num_constraints>``, then sections
    ``P <nnz>`` / ``A <nnz>`` with ``row col value`` triplets and ``q`` / ``b``
    with ``index value`` pairs.  Full double precision.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"qp {problem.num_vars} {problem.num_constraints}\n")
        Pc = problem.P.tocoo()
        fh.write(f"P {Pc.nnz}\n")
        for i, j, v in zip(Pc.row, Pc.col, Pc.data):
            fh.write(f"{i} {j} {v!r}\n")
        fh.write(f"q {len(problem.q)}\n")
        for i, v in enumerate(problem.q):
            fh.write(f"{i} {v!r}\n")
        Ac = problem.A.tocoo()
        fh.write(f"A {Ac.nnz}\n")
        for i, j, v in zip(Ac.row, Ac.col, Ac.data):
            fh.write(f"{i} {j} {v!r}\n")
        fh.write(f"b {len(problem.b)}\n")
        for i, v in enumerate(problem.b):
            fh.write(f"{i} {v!r}\n")
