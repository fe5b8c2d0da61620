import json

import numpy as np
import pytest

from shapelasso import Dataset, InvalidInputError, generate, read_csv, standardize_fit
from shapelasso.data import (
    SyntheticConfig,
    destandardize_y,
    standardize_apply,
    write_csv,
    write_sidecar,
)

SEMI_COLUMNS = ["TOTEX"] + [f"x{i}" for i in range(1, 17)] + \
    [f"z{i}" for i in range(1, 9)]


class TestGenerate:
    def test_deterministic(self):
        cfg = SyntheticConfig(n=20, d=4, s=2, rho=0.3, snr=5.0, seed=42)
        a = generate(cfg)
        b = generate(cfg)
        assert a.train.X.tobytes() == b.train.X.tobytes()
        assert a.train.y.tobytes() == b.train.y.tobytes()
        assert a.test.X.tobytes() == b.test.X.tobytes()
        assert a.truth.indices == b.truth.indices

    def test_shapes_and_support(self):
        cfg = SyntheticConfig(n=30, d=6, s=3, rho=0.5, snr=2.0, seed=0,
                              test_n=50)
        out = generate(cfg)
        assert out.train.X.shape == (30, 6)
        assert out.test.X.shape == (50, 6)
        assert len(out.truth) == 3

    def test_fixed_support(self):
        cfg = SyntheticConfig(n=10, d=10, s=2, rho=0.3, snr=2.0, seed=0,
                              support=(3, 9))
        assert generate(cfg).truth.indices == (3, 9)

    def test_rho_zero_uncorrelated(self):
        cfg = SyntheticConfig(n=10_000, d=4, s=1, rho=0.0, snr=5.0, seed=1)
        X = generate(cfg).train.X
        corr = np.corrcoef(X.T)
        off = corr[~np.eye(4, dtype=bool)]
        assert np.max(np.abs(off)) < 0.1

    def test_correlation_structure(self):
        cfg = SyntheticConfig(n=10_000, d=5, s=1, rho=0.6, snr=5.0, seed=2)
        X = generate(cfg).train.X
        corr = np.corrcoef(X.T)
        idx = np.arange(5)
        target = 0.6 ** np.abs(idx[:, None] - idx[None, :])
        assert np.max(np.abs(corr - target)) < 0.05

    def test_huge_snr_noise_free(self):
        cfg = SyntheticConfig(n=200, d=3, s=2, rho=0.2, snr=1e12, seed=3)
        out = generate(cfg)
        resid = np.abs(out.train.y - out.f0(out.train.X))
        assert np.max(resid) < 1e-4 * np.std(out.f0(out.train.X))

    def test_snr_calibration(self):
        cfg = SyntheticConfig(n=10_000, d=4, s=2, rho=0.3, snr=3.0, seed=4)
        out = generate(cfg)
        ratio = np.var(out.train.y) / out.sigma ** 2
        assert ratio == pytest.approx(3.0 + 1.0, rel=0.15)

    def test_train_test_streams_differ(self):
        cfg = SyntheticConfig(n=50, d=3, s=1, rho=0.0, snr=5.0, seed=5, test_n=50)
        out = generate(cfg)
        assert not np.allclose(out.train.X, out.test.X)

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            SyntheticConfig(n=10, d=3, s=4, rho=0.3, snr=1.0, seed=0)
        with pytest.raises(InvalidInputError):
            SyntheticConfig(n=10, d=3, s=1, rho=1.0, snr=1.0, seed=0)
        with pytest.raises(InvalidInputError):
            SyntheticConfig(n=10, d=3, s=1, rho=0.3, snr=0.0, seed=0)


class TestReadCsv:
    def test_basic(self, tmp_path):
        p = tmp_path / "toy.csv"
        p.write_text("y,x1,x2\n1.0,2.0,3.0\n4.0,5.0,6.0\n0.5,1.5,2.5\n")
        data = read_csv(p, "y")
        assert data.n == 3 and data.d == 2
        assert data.feature_names == ("x1", "x2")
        np.testing.assert_allclose(data.y, [1.0, 4.0, 0.5])

    def test_blank_cell_cites_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("y,x1\n1.0,2.0\n3.0,\n")
        with pytest.raises(InvalidInputError, match="line 3"):
            read_csv(p, "y")

    def test_non_numeric_names_column(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("y,x1\n1.0,2.0\n3.0,oops\n")
        with pytest.raises(InvalidInputError, match="x1"):
            read_csv(p, "y")

    def test_missing_response(self, tmp_path):
        p = tmp_path / "toy.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(InvalidInputError, match="response"):
            read_csv(p, "y")

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("y,x1\n1.0,2.0,9.0\n")
        with pytest.raises(InvalidInputError, match="line 2"):
            read_csv(p, "y")

    def test_feature_subset(self, tmp_path):
        p = tmp_path / "toy.csv"
        p.write_text("y,x1,x2,x3\n1,2,3,4\n5,6,7,8\n")
        data = read_csv(p, "y", ["x3", "x1"])
        assert data.feature_names == ("x3", "x1")
        np.testing.assert_allclose(data.X[0], [4.0, 2.0])

    def test_semi_schema_width(self, tmp_path):
        # output + 16 production + 8 contextual columns -> 24 features
        p = tmp_path / "semi.csv"
        rng = np.random.default_rng(0)
        rows = [",".join(SEMI_COLUMNS)]
        for _ in range(5):
            rows.append(",".join(str(round(v, 3))
                                 for v in rng.uniform(1, 100, len(SEMI_COLUMNS))))
        p.write_text("\n".join(rows) + "\n")
        data = read_csv(p, "TOTEX")
        assert data.n == 5 and data.d == 24

    def test_roundtrip_with_write(self, tmp_path):
        cfg = SyntheticConfig(n=8, d=3, s=1, rho=0.2, snr=4.0, seed=6)
        out = generate(cfg)
        p = tmp_path / "synth.csv"
        write_csv(out.train, p)
        back = read_csv(p, "y")
        np.testing.assert_array_equal(back.X, out.train.X)
        np.testing.assert_array_equal(back.y, out.train.y)

    def test_sidecar(self, tmp_path):
        cfg = SyntheticConfig(n=8, d=3, s=2, rho=0.2, snr=4.0, seed=7)
        out = generate(cfg)
        p = tmp_path / "synth.json"
        write_sidecar(out, p)
        doc = json.loads(p.read_text())
        assert doc["config"]["n"] == 8
        assert doc["support"] == list(out.truth)
        assert doc["sigma"] == out.sigma


class TestStandardization:
    def test_roundtrip_identity(self):
        rng = np.random.default_rng(8)
        data = Dataset(5 + 2 * rng.standard_normal((20, 3)),
                       10 + 3 * rng.standard_normal(20))
        std = standardize_fit(data)
        z = standardize_apply(std, data)
        np.testing.assert_allclose(std.invert_x(z.X), data.X, atol=1e-12)
        np.testing.assert_allclose(destandardize_y(std, z.y), data.y, atol=1e-12)

    def test_standardized_stats(self):
        rng = np.random.default_rng(9)
        data = Dataset(rng.standard_normal((500, 2)), rng.standard_normal(500))
        std = standardize_fit(data)
        z = standardize_apply(std, data)
        np.testing.assert_allclose(z.X.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(z.X.std(axis=0), 1.0, atol=1e-12)

    def test_already_standardized_near_identity(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((5000, 2))
        X = (X - X.mean(0)) / X.std(0)
        y = rng.standard_normal(5000)
        y = (y - y.mean()) / y.std()
        std = standardize_fit(Dataset(X, y))
        np.testing.assert_allclose(std.x_mean, 0.0, atol=1e-12)
        np.testing.assert_allclose(std.x_scale, 1.0, atol=1e-12)

    def test_constant_column_warns_and_zeroes(self):
        X = np.column_stack([np.ones(5), np.arange(5.0)])
        data = Dataset(X, np.arange(5.0))
        with pytest.warns(UserWarning, match="constant"):
            std = standardize_fit(data)
        assert std.x_scale[0] == 1.0
        z = standardize_apply(std, data)
        np.testing.assert_allclose(z.X[:, 0], 0.0)
