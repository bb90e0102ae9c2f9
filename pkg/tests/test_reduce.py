import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vmdgarch.errors import ConfigError, DegenerateDataError
from vmdgarch.garch import FeatureMatrix, feature_column_map
from vmdgarch.reduce import (
    Kernel,
    ReductionModels,
    center_gram,
    fit_kda,
    fit_kpca,
    ncse,
    reduce_pipeline,
    select_by_ncse,
    transform_kda,
    transform_kpca,
)


def _blobs(n_classes, per_class, dim, spread=8.0, seed=0):
    rng = np.random.default_rng(seed)
    centres = rng.normal(0.0, spread, (n_classes, dim))
    X = np.vstack([c + rng.standard_normal((per_class, dim)) for c in centres])
    y = np.repeat([f"S{i + 1}" for i in range(n_classes)], per_class)
    return X, y


def _pca_scores(X):
    Xc = X - X.mean(axis=0)
    w, V = np.linalg.eigh(Xc.T @ Xc)
    order = np.argsort(w)[::-1]
    return Xc @ V[:, order], w[order]


def _match_sign(A, B):
    s = np.sign(np.sum(A * B, axis=0))
    return A * s


class TestKernel:
    def test_unknown(self):
        with pytest.raises(ConfigError):
            Kernel("poly")

    def test_median_bandwidth(self):
        X = np.array([[0.0], [1.0], [3.0]])
        assert Kernel().resolve(X).gamma == pytest.approx(1.0 / (2.0 * 2.0**2))

    def test_rbf_values(self):
        k = Kernel("rbf", gamma=0.5)
        assert k([[0.0, 0.0]], [[1.0, 1.0]])[0, 0] == pytest.approx(np.exp(-1.0))

    def test_polynomial_and_sigmoid(self):
        A, B = np.array([[1.0, 2.0]]), np.array([[3.0, -1.0]])
        assert Kernel("polynomial", gamma=1.0, degree=2, coef0=1.0)(A, B)[0, 0] == 4.0
        assert Kernel("sigmoid", gamma=0.1, coef0=0.0)(A, B)[0, 0] == pytest.approx(np.tanh(0.1))


class TestNcse:
    def test_example(self):
        np.testing.assert_allclose(ncse([8.0, 1.0, 1.0]), [0.8, 0.9, 1.0])
        assert select_by_ncse([8.0, 1.0, 1.0], 0.95) == 3

    def test_single(self):
        assert list(ncse([1.0])) == [1.0]

    def test_tie(self):
        assert select_by_ncse([5.0, 5.0, 0.0], 0.95) == 2

    def test_all_zero(self):
        with pytest.raises(DegenerateDataError):
            ncse([0.0, 0.0])

    def test_unsorted(self):
        with pytest.raises(ConfigError):
            ncse([1.0, 2.0])

    @given(arrays(np.float64, st.integers(1, 20), elements=st.floats(0.0, 1e6)).filter(lambda a: a.sum() > 0))
    def test_monotone_ending_at_one(self, lam):
        c = ncse(np.sort(lam)[::-1])
        assert np.all(np.diff(c) >= 0)
        assert c[-1] == 1.0


class TestKpca:
    def test_linear_matches_pca(self):
        X = np.random.default_rng(0).standard_normal((100, 10))
        m = fit_kpca(X, Kernel("linear"), ncse_threshold=1.0)
        ref, _ = _pca_scores(X)
        ref = ref[:, : m.n_p]
        # unit-norm axes give scores equal to the projections of the centred data
        np.testing.assert_allclose(_match_sign(m.scores, ref), ref, atol=1e-8)
        np.testing.assert_allclose(_match_sign(m.transform(X + 0.0), ref), ref, atol=1e-8)

    def test_linear_projection_of_new_rows(self):
        rng = np.random.default_rng(1)
        X, Y = rng.standard_normal((60, 5)), rng.standard_normal((7, 5))
        m = fit_kpca(X, Kernel("linear"), ncse_threshold=1.0)
        mu = X.mean(axis=0)
        _, V = np.linalg.eigh((X - mu).T @ (X - mu))
        V = V[:, ::-1]
        ref = (Y - mu) @ V
        out = transform_kpca(m, Y)
        s = np.sign(np.sum(m.scores * ((X - mu) @ V), axis=0))
        np.testing.assert_allclose(out * s, ref, atol=1e-8)

    def test_threshold_one_keeps_all_positive(self):
        X = np.random.default_rng(2).standard_normal((20, 4))
        assert fit_kpca(X, Kernel("linear"), 1.0).n_p == 4
        assert fit_kpca(X, Kernel("rbf"), 1.0).n_p == 19

    def test_duplicates_degenerate(self):
        with pytest.raises(DegenerateDataError):
            fit_kpca(np.ones((5, 3)), Kernel("rbf"))

    def test_centered_gram_psd(self):
        X = np.random.default_rng(3).standard_normal((30, 6))
        R = center_gram(Kernel().resolve(X)(X, X))
        np.testing.assert_allclose(R, R.T, atol=1e-12)
        assert np.linalg.eigvalsh(R).min() > -1e-9

    def test_scores_uncorrelated(self):
        X = np.random.default_rng(4).standard_normal((40, 6))
        m = fit_kpca(X, Kernel("rbf"), 0.95)
        C = m.scores.T @ m.scores
        off = C - np.diag(np.diag(C))
        assert np.abs(off).max() < 1e-8 * m.eigvals[0]
        np.testing.assert_allclose(np.diag(C), m.eigvals, rtol=1e-8)

    @pytest.mark.parametrize("kind", ["rbf", "linear", "polynomial", "sigmoid"])
    def test_transform_training_rows(self, kind):
        X = np.random.default_rng(5).standard_normal((25, 4))
        m = fit_kpca(X, Kernel(kind), 0.99)
        np.testing.assert_allclose(m.transform(X), m.scores, atol=1e-8)

    def test_duplicated_input_rows(self):
        X = np.random.default_rng(6).standard_normal((25, 4))
        m = fit_kpca(X, Kernel(), 0.95)
        out = m.transform(np.vstack([X[3], X[3]]))
        np.testing.assert_array_equal(out[0], out[1])

    def test_dimension_mismatch(self):
        m = fit_kpca(np.random.default_rng(7).standard_normal((10, 3)))
        with pytest.raises(ConfigError):
            m.transform(np.zeros((1, 4)))


class TestKda:
    def test_two_blobs_separate(self):
        X, y = _blobs(2, 40, 5, spread=3.0, seed=1)
        m = fit_kda(X, y, Kernel("linear"))
        z = m.embedding[:, 0]
        a, b = z[y == "S1"], z[y == "S2"]
        assert a.max() < b.min() or b.max() < a.min()
        assert m.n_out == 1

    @pytest.mark.parametrize("n_c", [9, 17])
    def test_dimension_bound(self, n_c):
        X, y = _blobs(n_c, 10, 30, seed=n_c)
        m = fit_kda(X, y, Kernel("rbf"))
        assert m.n_out <= n_c - 1
        assert m.n_out == n_c - 1

    @settings(deadline=None, max_examples=15)
    @given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 1000))
    def test_bound_always_holds(self, n_c, dim, seed):
        X, y = _blobs(n_c, 4, dim, seed=seed)
        m = fit_kda(X, y, Kernel("rbf"))
        assert 1 <= m.n_out <= n_c - 1

    def test_transform_training_rows(self):
        X, y = _blobs(3, 15, 4)
        m = fit_kda(X, y, Kernel("rbf"))
        np.testing.assert_allclose(transform_kda(m, X), m.embedding, atol=1e-8)

    def test_shifted_copy_keeps_class_order(self):
        X, y = _blobs(3, 20, 4, seed=2)
        a = fit_kda(X, y, Kernel("rbf"))
        b = fit_kda(X + 100.0, y, Kernel("rbf"))
        means = lambda m: np.array([m.embedding[y == c, 0].mean() for c in sorted(set(y))])
        assert np.argsort(means(a)).tolist() == np.argsort(means(b)).tolist()

    def test_zero_vector_linear(self):
        X, y = _blobs(3, 10, 4)
        m = fit_kda(X, y, Kernel("linear"))
        out = transform_kda(m, np.zeros((1, 4)))
        k_col = X @ np.zeros(4)
        expected = (k_col - k_col.mean() - m.col_means + m.grand_mean) @ m.alphas
        np.testing.assert_allclose(out[0], expected, atol=1e-12)
        np.testing.assert_allclose(out[0], -(m.col_means - m.grand_mean) @ m.alphas, atol=1e-12)
        assert np.all(np.isfinite(out))

    def test_single_class(self):
        with pytest.raises(ConfigError):
            fit_kda(np.random.default_rng(0).standard_normal((5, 2)), ["a"] * 5)

    def test_default_ridge(self):
        X, y = _blobs(2, 10, 3)
        m = fit_kda(X, y, Kernel("rbf", gamma=0.1))
        K = center_gram(Kernel("rbf", gamma=0.1)(X, X))
        assert m.ridge == pytest.approx(1e-8 * np.trace(K) / 20)


class TestReducePipeline:
    def _fm(self, n_c=17, per=6, n_f=62, seed=0):
        X, y = _blobs(n_c, per, n_f, seed=seed)
        return FeatureMatrix(X, y, column_map=feature_column_map((10, 7, 7, 7)) if n_f == 62 else [])

    def test_sa_identity(self):
        fm = self._fm()
        models, out = reduce_pipeline(fm, "SA")
        assert out.n_f == 62 and models.n_features == 62
        np.testing.assert_array_equal(out.X, fm.X)
        assert out.column_map == fm.column_map

    def test_sd_bound(self):
        _, out = reduce_pipeline(self._fm(), "SD")
        assert out.n_f <= 16

    def test_sc_bound_nine_classes(self):
        _, out = reduce_pipeline(self._fm(n_c=9, per=10, n_f=48), "SC")
        assert out.n_f <= 8

    def test_sb_rank_bound(self):
        X = np.random.default_rng(1).standard_normal((12, 5))
        fm = FeatureMatrix(X, ["a", "b"] * 6)
        _, out = reduce_pipeline(fm, "SB", Kernel("linear"), ncse_threshold=1.0)
        assert out.n_f == min(12 - 1, 5)

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            reduce_pipeline(self._fm(), "SE")

    @pytest.mark.parametrize("mode", ["SA", "SB", "SC", "SD"])
    def test_models_transform_and_round_trip(self, mode, tmp_path):
        fm = self._fm(n_c=4, per=8, n_f=6)
        models, out = reduce_pipeline(fm, mode)
        np.testing.assert_allclose(models.transform(fm.X), out.X, atol=1e-8)
        models.save(tmp_path / "m.json")
        back = ReductionModels.load(tmp_path / "m.json")
        np.testing.assert_allclose(back.transform(fm.X), out.X, atol=1e-8)
        assert json.loads((tmp_path / "m.json").read_text())["mode"] == mode
