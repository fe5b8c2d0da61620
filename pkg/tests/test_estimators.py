import numpy as np
import pytest

from shapelasso import (
    Dataset,
    FitSpec,
    InvalidInputError,
    QpProblem,
    SolveTolerances,
    build_convexity_constraints,
    compute_adaptive_weights,
    fit,
    fit_cnls,
    fit_lasso1,
    fit_lasso2,
    fit_relaxed,
    fit_slasso,
    l1_lq_norm,
    lambda_max,
    oracle_solve,
    solve,
)
from shapelasso.estimators import WEIGHT_CAP, build_problem, fit_path
from shapelasso.model import SubgradientMatrix

TOL = SolveTolerances()
TIGHT = SolveTolerances(eps_feas=1e-9, eps_kkt=1e-9)


def toy3():
    return Dataset(np.array([[0.0], [1.0], [2.0]]), np.array([0.0, 1.0, 0.0]))


def convex_random(n, d, seed, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = np.sum(X ** 2, axis=1) + noise * rng.standard_normal(n)
    return Dataset(X, y)


class TestConvexityBlock:
    @pytest.mark.parametrize("n,expected", [(1, 0), (2, 2), (10, 90)])
    def test_row_counts(self, n, expected):
        X = np.linspace(0, 1, n).reshape(-1, 1)
        assert build_convexity_constraints(X).shape[0] == expected

    def test_row_contents(self):
        X = np.array([[0.0], [2.0]])
        A = build_convexity_constraints(X).toarray()
        # row (0,1): theta_0 - theta_1 + xi_0 * (2 - 0) <= 0
        np.testing.assert_allclose(A[0], [1.0, -1.0, 2.0, 0.0])
        # row (1,0): theta_1 - theta_0 + xi_1 * (0 - 2) <= 0
        np.testing.assert_allclose(A[1], [-1.0, 1.0, 0.0, -2.0])

    def test_duplicate_points_allowed(self):
        X = np.array([[1.0], [1.0]])
        A = build_convexity_constraints(X).toarray()
        np.testing.assert_allclose(A[:, 2:], 0.0)  # no slope coupling


class TestCnls:
    def test_two_point_interpolation(self):
        data = Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
        r = fit_cnls(data)
        assert r.sse == pytest.approx(0.0, abs=1e-8)
        np.testing.assert_allclose(r.model.theta, [0.0, 1.0], atol=1e-6)

    def test_three_point_kink(self):
        r = fit_cnls(toy3())
        np.testing.assert_allclose(r.model.theta, [1 / 3] * 3, atol=1e-6)
        assert r.sse == pytest.approx(2 / 3, abs=1e-6)
        assert r.penalty_value == 0.0

    def test_convex_data_interpolated(self):
        data = Dataset(np.array([[0.0], [1.0], [2.0]]), np.array([0.0, 0.0, 1.0]))
        r = fit_cnls(data)
        assert r.sse == pytest.approx(0.0, abs=1e-8)

    def test_single_point_shortcut(self):
        data = Dataset(np.array([[5.0, 2.0]]), np.array([3.0]))
        r = fit_cnls(data)
        assert r.model.theta[0] == 3.0
        assert r.solver.iterations == 0

    def test_variable_and_constraint_counts(self):
        data = convex_random(6, 2, 0)
        p = build_problem(data, FitSpec("cnls"))
        assert p.num_vars == 6 + 6 * 2
        assert p.num_constraints == 6 * 5
        pm = build_problem(data, FitSpec("cnls", monotone=True))
        assert pm.num_constraints == 6 * 5 + 6 * 2


class TestSlasso:
    def test_zero_lambda_matches_cnls(self):
        data = convex_random(12, 2, 1)
        a = fit_cnls(data, tol=TIGHT)
        b = fit_slasso(data, 0.0, tol=TIGHT)
        np.testing.assert_allclose(a.model.theta, b.model.theta, atol=1e-5)

    def test_large_lambda_flat_model(self):
        data = convex_random(10, 2, 2)
        r = fit_slasso(data, 10 * lambda_max(data))
        assert len(r.active_set) == 0
        np.testing.assert_allclose(r.model.theta, np.mean(data.y), atol=1e-6)

    def test_large_lambda_verified_by_oracle(self):
        # tiny instance: oracle confirms the flat model is optimal
        data = convex_random(3, 1, 3)
        lam = 10 * lambda_max(data)
        p = build_problem(data, FitSpec("slasso", lam=lam))
        o = oracle_solve(QpProblem(p.P, p.q, p.A, p.b))
        np.testing.assert_allclose(o.z[:3], np.mean(data.y), atol=1e-7)

    def test_negative_lambda_rejected(self):
        with pytest.raises(InvalidInputError):
            FitSpec("slasso", lam=-0.5)

    def test_epigraph_tightness(self):
        data = convex_random(8, 2, 4)
        lam = 0.05 * lambda_max(data)
        p = build_problem(data, FitSpec("slasso", lam=lam))
        sol = solve(p, TOL)
        xi = sol.z[p.var_layout["xi"]].reshape(8, 2)
        t = sol.z[p.var_layout["t"]]
        np.testing.assert_allclose(t, np.max(np.abs(xi), axis=0), atol=1e-6)

    def test_penalty_value_matches_norm(self):
        data = convex_random(8, 2, 5)
        r = fit_slasso(data, 0.05 * lambda_max(data))
        assert r.penalty_value == pytest.approx(
            l1_lq_norm(r.model.xi, np.inf), abs=1e-8)


class TestAdaptiveWeights:
    def test_reciprocal(self):
        m = SubgradientMatrix(np.array([[2.0, 0.5], [0.0, 0.0]]))
        np.testing.assert_allclose(compute_adaptive_weights(m), [0.5, 2.0])

    def test_zero_column_capped(self):
        m = SubgradientMatrix(np.array([[1.0, 0.0]]))
        w = compute_adaptive_weights(m)
        assert w[1] == WEIGHT_CAP

    def test_unit_weights_equal_slasso(self):
        data = convex_random(8, 2, 6)
        lam = 0.1 * lambda_max(data)
        a = fit_slasso(data, lam, tol=TIGHT)
        b = fit_slasso(data, lam, weights=np.ones(2), tol=TIGHT)
        np.testing.assert_allclose(a.model.theta, b.model.theta, atol=1e-6)

    def test_aslasso_family_computes_weights(self):
        data = convex_random(10, 2, 7)
        r = fit(data, FitSpec("aslasso", lam=0.05 * lambda_max(data)))
        assert r.spec.weights is not None and len(r.spec.weights) == 2


class TestLasso1:
    def test_zero_lambda_matches_cnls(self):
        data = convex_random(10, 2, 8)
        a = fit_cnls(data, tol=TIGHT)
        b = fit_lasso1(data, 0.0, tol=TIGHT)
        np.testing.assert_allclose(a.model.theta, b.model.theta, atol=1e-5)

    def test_penalty_value_is_elementwise_l1(self):
        data = convex_random(8, 2, 9)
        r = fit_lasso1(data, 0.02 * lambda_max(data))
        assert r.penalty_value == pytest.approx(
            l1_lq_norm(r.model.xi, 1), abs=1e-8)


class TestLasso2:
    def test_huge_bound_matches_cnls(self):
        data = convex_random(8, 2, 10)
        a = fit_cnls(data, tol=TIGHT)
        b = fit_lasso2(data, 1e6, tol=TIGHT)
        np.testing.assert_allclose(a.model.theta, b.model.theta, atol=1e-5)

    def test_infinite_bound_matches_cnls(self):
        data = convex_random(8, 2, 10)
        a = fit_cnls(data, tol=TIGHT)
        b = fit_lasso2(data, np.inf, tol=TIGHT)
        np.testing.assert_allclose(a.model.theta, b.model.theta, atol=1e-5)

    def test_zero_bound_forces_flat_model(self):
        data = convex_random(8, 2, 11)
        r = fit_lasso2(data, 0.0)
        assert len(r.active_set) == 0
        np.testing.assert_allclose(r.model.theta, np.mean(data.y), atol=1e-6)

    def test_negative_bound_rejected(self):
        with pytest.raises(InvalidInputError):
            FitSpec("lasso2", c_bound=-1.0)
        with pytest.raises(InvalidInputError):
            FitSpec("lasso2")

    def test_row_norms_respect_bound(self):
        data = convex_random(10, 2, 12)
        c = 0.5
        r = fit_lasso2(data, c)
        row_norms = np.sum(np.abs(r.model.xi.values), axis=1)
        assert np.max(row_norms) <= c + 1e-6


class TestRelaxed:
    def test_gamma_one_matches_stage1(self):
        data = convex_random(12, 3, 13)
        lam = 0.1 * lambda_max(data)
        full = fit_slasso(data, lam, tol=TIGHT)
        relaxed = fit_relaxed(data, lam, 1.0, tol=TIGHT)
        np.testing.assert_allclose(full.model.theta, relaxed.model.theta,
                                   atol=1e-5)

    def test_gamma_zero_matches_cnls_on_selection(self):
        data = convex_random(12, 3, 14)
        lam = 0.1 * lambda_max(data)
        relaxed = fit_relaxed(data, lam, 0.0, tol=TIGHT)
        cols = np.array(relaxed.stage1_active_set.indices)
        sub = Dataset(data.X[:, cols], data.y)
        cn = fit_cnls(sub, tol=TIGHT)
        np.testing.assert_allclose(cn.model.theta, relaxed.model.theta,
                                   atol=1e-5)

    def test_support_nesting(self):
        data = convex_random(12, 3, 15)
        lam = 0.15 * lambda_max(data)
        for gamma in (0.0, 0.5, 1.0):
            r = fit_relaxed(data, lam, gamma)
            assert set(r.active_set) <= set(r.stage1_active_set)

    def test_empty_selection_constant_model(self):
        data = convex_random(8, 2, 16)
        r = fit_relaxed(data, 50 * lambda_max(data), 0.5)
        assert len(r.active_set) == 0
        assert r.warnings
        np.testing.assert_allclose(r.model.theta, np.mean(data.y), atol=1e-9)

    def test_gamma_out_of_range_rejected(self):
        with pytest.raises(InvalidInputError):
            FitSpec("relaxed_slasso", lam=1.0, gamma=1.5)


class TestMonotone:
    def test_nonnegative_subgradients(self):
        rng = np.random.default_rng(17)
        X = rng.uniform(0, 2, (12, 2))
        y = X[:, 0] ** 2 + 2 * X[:, 1] + 0.05 * rng.standard_normal(12)
        data = Dataset(X, y)
        r = fit_cnls(data, monotone=True)
        assert np.min(r.model.xi.values) >= -1e-6

    def test_predictions_nondecreasing(self):
        rng = np.random.default_rng(18)
        X = rng.uniform(0, 2, (12, 2))
        y = np.sum(X ** 2, axis=1) + 0.05 * rng.standard_normal(12)
        r = fit_cnls(Dataset(X, y), monotone=True)
        grid = np.linspace(-1, 3, 10)
        for k in range(2):
            pts = np.tile(np.array([0.5, 0.5]), (10, 1))
            pts[:, k] = grid
            vals = r.model.evaluate(pts)
            assert np.all(np.diff(vals) >= -1e-8)


class TestLambdaMax:
    def test_identity(self):
        data = Dataset(np.eye(2), np.array([1.0, -1.0]))
        assert lambda_max(data) == pytest.approx(2.0)

    def test_zero_response(self):
        data = Dataset(np.eye(2), np.zeros(2))
        assert lambda_max(data) == 0.0

    def test_zero_column_contributes_nothing(self):
        X = np.array([[1.0, 0.0], [2.0, 0.0]])
        y = np.array([1.0, 1.0])
        data = Dataset(X, y)
        assert lambda_max(data) == pytest.approx(3.0)


class TestPathProperties:
    def test_sse_nondecreasing_and_norm_nonincreasing_in_lambda(self):
        data = convex_random(12, 2, 19)
        lams = np.geomspace(lambda_max(data), 1e-3 * lambda_max(data), 8)
        fits = fit_path(data, "slasso", lams)
        sses = [f.sse for f in fits]
        norms = [l1_lq_norm(f.model.xi, np.inf) for f in fits]
        # lams descend, so sse must descend and the norm must grow
        assert all(s2 <= s1 + 1e-7 for s1, s2 in zip(sses, sses[1:]))
        assert all(n2 >= n1 - 1e-7 for n1, n2 in zip(norms, norms[1:]))

    def test_objective_nondecreasing_in_lambda(self):
        data = convex_random(10, 2, 20)
        objs = []
        for frac in (0.01, 0.1, 0.5, 1.0):
            lam = frac * lambda_max(data)
            p = build_problem(data, FitSpec("slasso", lam=lam))
            sol = solve(p, TOL)
            # the penalized optimal value includes the constant 0.5*y'y
            objs.append(sol.objective + 0.5 * float(data.y @ data.y))
        assert all(b >= a - 1e-7 for a, b in zip(objs, objs[1:]))

    def test_path_matches_individual_fits(self):
        data = convex_random(10, 2, 21)
        lams = [0.3 * lambda_max(data), 0.05 * lambda_max(data)]
        path = fit_path(data, "slasso", lams, tol=TIGHT)
        for lam, res in zip(lams, path):
            single = fit_slasso(data, lam, tol=TIGHT)
            np.testing.assert_allclose(res.model.theta, single.model.theta,
                                       atol=1e-5)

    def test_relaxed_path_grid(self):
        data = convex_random(10, 2, 22)
        lams = [0.2 * lambda_max(data), 0.05 * lambda_max(data)]
        fits = fit_path(data, "relaxed_slasso", lams, gammas=[0.0, 1.0],
                        tol=TIGHT)
        assert set(fits) == {(0, 0), (0, 1), (1, 0), (1, 1)}
        single = fit_relaxed(data, lams[1], 0.0, tol=TIGHT)
        np.testing.assert_allclose(fits[(1, 0)].model.theta,
                                   single.model.theta, atol=1e-5)


class TestLinearDegeneration:
    def test_tied_planes_reproduce_linear_regression(self):
        # force one shared hyperplane: variables (intercept, slope); the
        # comparison constraints hold with equality automatically, so the
        # solution must match ordinary least squares
        import scipy.sparse as sp

        rng = np.random.default_rng(23)
        X = rng.standard_normal((20, 2))
        y = 1.0 + X @ np.array([2.0, -1.0]) + 0.1 * rng.standard_normal(20)
        Z = np.column_stack([np.ones(20), X])
        P = sp.csc_matrix(Z.T @ Z)
        q = -Z.T @ y
        p = QpProblem(P, q, sp.csc_matrix((0, 3)), np.zeros(0))
        sol = solve(p, TOL)
        beta_ls, *_ = np.linalg.lstsq(Z, y, rcond=None)
        np.testing.assert_allclose(sol.z, beta_ls, atol=1e-7)


class TestFeasibility:
    @pytest.mark.parametrize("family,kw", [
        ("cnls", {}),
        ("slasso", {"lam": 0.5}),
        ("lasso1", {"lam": 0.5}),
        ("lasso2", {"c_bound": 1.0}),
    ])
    def test_models_satisfy_convexity(self, family, kw):
        data = convex_random(10, 2, 24)
        spec = FitSpec(family, **kw)
        r = fit(data, spec)
        assert r.model.max_convexity_violation() <= 1.1e-6
        assert r.solver.primal_residual <= TOL.eps_feas


class TestAnchorPrediction:
    def test_fitted_model_reproduces_theta_at_anchors(self):
        data = convex_random(12, 2, 30)
        for r in (fit_cnls(data), fit_slasso(data, 0.1 * lambda_max(data))):
            preds = r.model.evaluate(data.X)
            assert np.max(np.abs(preds - r.model.theta)) <= 1.1e-6
            assert np.all(preds >= r.model.theta - 1.1e-6)
