import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shapelasso import (
    ActiveSet,
    Dataset,
    InvalidInputError,
    MaxAffineModel,
    Standardization,
    SubgradientMatrix,
    default_zero_tau,
    l1_lq_norm,
    predict,
    support_of,
)
from shapelasso.model import constant_model


def mat(rows):
    return SubgradientMatrix(np.array(rows, dtype=float))


class TestMixedNorm:
    def test_zero_matrix(self):
        assert l1_lq_norm(mat(np.zeros((3, 2))), np.inf) == 0.0

    def test_inf_norm_direct(self):
        assert l1_lq_norm(mat([[1, -2], [3, 0]]), np.inf) == pytest.approx(5.0)

    def test_l1_direct(self):
        assert l1_lq_norm(mat([[1, -2], [3, 0]]), 1) == pytest.approx(6.0)

    def test_identity_inf(self):
        assert l1_lq_norm(mat(np.eye(2)), np.inf) == pytest.approx(2.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidInputError):
            l1_lq_norm(np.array([[np.nan, 0.0]]), 1)

    def test_rejects_bad_order(self):
        with pytest.raises(InvalidInputError):
            l1_lq_norm(mat([[1.0]]), 3)

    @given(st.integers(1, 6), st.integers(1, 5),
           st.floats(-10, 10), st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_absolute_homogeneity(self, n, d, c, seed):
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((n, d))
        for q in (1, 2, np.inf):
            assert l1_lq_norm(c * v, q) == pytest.approx(
                abs(c) * l1_lq_norm(v, q), rel=1e-9, abs=1e-12)

    @given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_triangle_inequality(self, n, d, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((n, d))
        b = rng.standard_normal((n, d))
        for q in (1, 2, np.inf):
            assert l1_lq_norm(a + b, q) <= \
                l1_lq_norm(a, q) + l1_lq_norm(b, q) + 1e-9

    @given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_order_monotonicity(self, n, d, seed):
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((n, d))
        assert l1_lq_norm(v, np.inf) <= l1_lq_norm(v, 2) + 1e-12
        assert l1_lq_norm(v, 2) <= l1_lq_norm(v, 1) + 1e-12


class TestSupport:
    def test_zero_matrix_empty(self):
        assert support_of(mat(np.zeros((4, 3))), 1e-6).indices == ()

    def test_threshold_definition(self):
        m = mat([[0.5, 1e-9, 2.0]])
        assert support_of(m, 1e-6).indices == (0, 2)

    def test_infinite_tau_empty(self):
        m = mat([[0.5, 1e-9, 2.0]])
        assert support_of(m, np.inf).indices == ()

    def test_negative_tau_rejected(self):
        with pytest.raises(InvalidInputError):
            support_of(mat([[1.0]]), -1.0)

    @given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2 ** 31 - 1),
           st.floats(0, 3), st.floats(0, 3))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_tau(self, n, d, seed, t1, t2):
        rng = np.random.default_rng(seed)
        m = mat(rng.standard_normal((n, d)))
        lo, hi = sorted((t1, t2))
        assert set(support_of(m, hi)) <= set(support_of(m, lo))

    def test_default_tau_scale_relative(self):
        small = mat(0.5 * np.ones((2, 2)))
        big = mat(100.0 * np.ones((2, 2)))
        assert default_zero_tau(small) == pytest.approx(1e-6)
        assert default_zero_tau(big) == pytest.approx(1e-4)


class TestPredict:
    def test_single_hyperplane(self):
        m = MaxAffineModel(np.array([0.0]), mat([[1.0]]), np.array([[0.0]]))
        assert predict(m, np.array([2.0])) == pytest.approx(2.0)

    def test_max_of_two_lines(self):
        m = MaxAffineModel(np.array([0.0, 0.0]), mat([[-1.0], [1.0]]),
                           np.array([[0.0], [0.0]]))
        assert predict(m, np.array([3.0])) == pytest.approx(3.0)
        assert predict(m, np.array([-2.0])) == pytest.approx(2.0)

    def test_anchor_values(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((6, 2))
        y = np.sum(X ** 2, axis=1)
        # exact representation of a convex function via its own tangents
        m = MaxAffineModel(y, SubgradientMatrix(2 * X), X)
        for i in range(6):
            assert predict(m, X[i]) == pytest.approx(y[i], abs=1e-9)

    def test_dimension_mismatch(self):
        m = MaxAffineModel(np.array([0.0]), mat([[1.0, 0.0]]),
                           np.array([[0.0, 0.0]]))
        with pytest.raises(InvalidInputError):
            predict(m, np.array([1.0]))

    @given(st.integers(0, 2 ** 31 - 1), st.floats(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_convex_in_x(self, seed, alpha):
        rng = np.random.default_rng(seed)
        n, d = 5, 3
        X = rng.standard_normal((n, d))
        y = np.sum(X ** 2, axis=1)
        m = MaxAffineModel(y, SubgradientMatrix(2 * X), X)
        u = rng.standard_normal(d)
        v = rng.standard_normal(d)
        mid = alpha * u + (1 - alpha) * v
        assert predict(m, mid) <= \
            alpha * predict(m, u) + (1 - alpha) * predict(m, v) + 1e-10

    def test_standardized_roundtrip(self):
        rng = np.random.default_rng(7)
        X = 3.0 + 2.0 * rng.standard_normal((5, 2))
        y = np.sum((X - 3.0) ** 2, axis=1) + 10.0
        std = Standardization(X.mean(0), X.std(0), float(y.mean()), float(y.std()))
        Xs = std.apply_x(X)
        ys = std.apply_y(y)
        # tangent planes of the standardized function: chain rule on the scales
        grads = 2 * (X - 3.0) * std.x_scale / std.y_scale
        m = MaxAffineModel(ys, SubgradientMatrix(grads), Xs, standardization=std)
        # predictions at the anchors come back in original units
        for i in range(5):
            assert predict(m, X[i]) == pytest.approx(y[i], abs=1e-9)


class TestDatasetInvariants:
    def test_rejects_nan(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.array([[np.nan]]), np.array([1.0]))

    def test_rejects_inf_response(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.array([[1.0]]), np.array([np.inf]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.ones((3, 2)), np.ones(2))

    def test_feature_names_must_match_and_be_distinct(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.ones((2, 2)), np.ones(2), feature_names=("a",))
        with pytest.raises(InvalidInputError):
            Dataset(np.ones((2, 2)), np.ones(2), feature_names=("a", "a"))

    def test_immutable(self):
        d = Dataset(np.ones((2, 2)), np.ones(2))
        with pytest.raises(ValueError):
            d.X[0, 0] = 5.0


class TestModelValidation:
    def test_rejects_convexity_violation(self):
        # theta says the middle point is above the chord: not convex
        with pytest.raises(InvalidInputError):
            MaxAffineModel(np.array([0.0, 1.0, 0.0]),
                           mat([[0.0], [0.0], [0.0]]),
                           np.array([[0.0], [1.0], [2.0]]))

    def test_active_set_sorted_distinct(self):
        a = ActiveSet((3, 1))
        assert a.indices == (1, 3)
        with pytest.raises(InvalidInputError):
            ActiveSet((1, 1))

    def test_json_roundtrip_full_precision(self, tmp_path):
        rng = np.random.default_rng(11)
        X = rng.standard_normal((4, 3))
        y = np.sum(X ** 2, axis=1)
        m = MaxAffineModel(y, SubgradientMatrix(2 * X), X,
                           metadata={"family": "cnls"})
        path = tmp_path / "model.json"
        m.save_json(path)
        back = MaxAffineModel.load_json(path)
        np.testing.assert_array_equal(back.theta, m.theta)
        np.testing.assert_array_equal(back.xi.values, m.xi.values)
        np.testing.assert_array_equal(back.anchors, m.anchors)
        assert back.metadata["family"] == "cnls"

    def test_json_schema_version(self, tmp_path):
        m = constant_model(1.0, np.zeros((1, 1)))
        path = tmp_path / "m.json"
        m.save_json(path)
        doc = json.loads(path.read_text())
        assert doc["schema_version"] == 1
        assert doc["kind"] == "max_affine_model"
