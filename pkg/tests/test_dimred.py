import numpy as np
import pytest

from argmine.cluster import pairwise_distances
from argmine.dimred import (
    UmapConfig,
    fit_output_curve,
    fuzzy_graph,
    load_lsa,
    lsa_fit,
    lsa_transform,
    save_lsa,
    smooth_knn_calibration,
    umap_fit_transform,
)
from argmine.errors import DataError


def jacobi_svd_singular_values(A, sweeps=60, tol=1e-14):
    """One-sided Jacobi: orthogonalize columns by plane rotations; the
    singular values are the resulting column norms."""
    A = np.array(A, dtype=np.float64)
    n = A.shape[1]
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = float(A[:, p] @ A[:, p])
                beta = float(A[:, q] @ A[:, q])
                g = float(A[:, p] @ A[:, q])
                off = max(off, abs(g))
                if abs(g) < tol:
                    continue
                zeta = (beta - alpha) / (2.0 * g)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                ap = A[:, p].copy()
                A[:, p] = c * ap - s * A[:, q]
                A[:, q] = s * ap + c * A[:, q]
        if off < tol:
            break
    return np.sort(np.linalg.norm(A, axis=0))[::-1]


def trustworthiness(X, emb, k=5):
    """Rank-based neighborhood preservation of the embedding."""
    n = X.shape[0]
    d_high = pairwise_distances(X)
    d_low = pairwise_distances(emb)
    np.fill_diagonal(d_high, np.inf)
    np.fill_diagonal(d_low, np.inf)
    ranks_high = np.argsort(np.argsort(d_high, axis=1), axis=1) + 1
    penalty = 0.0
    for i in range(n):
        high_nn = set(np.argsort(d_high[i])[:k].tolist())
        low_nn = np.argsort(d_low[i])[:k]
        for j in low_nn:
            if int(j) not in high_nn:
                penalty += ranks_high[i, j] - k
    return 1.0 - 2.0 / (n * k * (2 * n - 3 * k - 1)) * penalty


class TestLsa:
    def test_rank_one_exact(self):
        u = np.array([1.0, 2.0, 3.0])[:, None]
        v = np.array([2.0, -1.0, 0.5, 4.0])[None, :]
        X = u @ v
        model = lsa_fit(X, 1)
        recon = lsa_transform(model, X) @ model.components
        assert np.linalg.norm(X - recon) / np.linalg.norm(X) < 1e-8

    def test_identity_singular_values(self):
        model = lsa_fit(np.eye(3), 3)
        np.testing.assert_allclose(model.singular_values, [1.0, 1.0, 1.0], atol=1e-12)

    def test_reconstruction_error_vs_jacobi_oracle(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((8, 5))
        model = lsa_fit(X, 2)
        recon = lsa_transform(model, X) @ model.components
        error = np.linalg.norm(X - recon)
        svals = jacobi_svd_singular_values(X)
        expected = np.sqrt((svals[2:] ** 2).sum())
        assert error == pytest.approx(expected, abs=1e-6)

    def test_singular_values_vs_jacobi_oracle_large_path(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((40, 210))  # wide: exercises block iteration
        model = lsa_fit(X, 5)
        svals = jacobi_svd_singular_values(X.T @ X)  # eigvals of gram = s^2
        np.testing.assert_allclose(
            model.singular_values, np.sqrt(svals[:5]), rtol=1e-6
        )

    def test_transform_reproduces_u_sigma(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((10, 7))
        model = lsa_fit(X, 3)
        Z = lsa_transform(model, X)
        # projections have squared column norms = singular values squared
        np.testing.assert_allclose(
            np.linalg.norm(Z, axis=0), model.singular_values, atol=1e-6
        )

    def test_zero_matrix(self):
        model = lsa_fit(np.eye(4), 2)
        assert not lsa_transform(model, np.zeros((3, 4))).any()

    def test_row_equal_to_component(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((9, 6))
        model = lsa_fit(X, 3)
        out = lsa_transform(model, model.components[0][None, :])
        np.testing.assert_allclose(out[0], [1.0, 0.0, 0.0], atol=1e-8)

    def test_components_orthonormal(self):
        rng = np.random.default_rng(12)
        X = rng.standard_normal((20, 12))
        model = lsa_fit(X, 5)
        gram = model.components @ model.components.T
        np.testing.assert_allclose(gram, np.eye(5), atol=1e-8)

    def test_reconstruction_error_non_increasing_in_k(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((12, 9))
        errors = []
        for k in range(1, 7):
            model = lsa_fit(X, k)
            recon = lsa_transform(model, X) @ model.components
            errors.append(np.linalg.norm(X - recon))
        assert all(a >= b - 1e-9 for a, b in zip(errors, errors[1:]))

    def test_sign_canonicalization(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((10, 6))
        model = lsa_fit(X, 4)
        for row in model.components:
            assert row[np.abs(row).argmax()] > 0

    def test_k_out_of_range(self):
        with pytest.raises(DataError):
            lsa_fit(np.eye(3), 4)
        with pytest.raises(DataError):
            lsa_fit(np.eye(3), 0)

    def test_shape_mismatch(self):
        model = lsa_fit(np.eye(4), 2)
        with pytest.raises(DataError):
            lsa_transform(model, np.zeros((2, 5)))

    def test_serialization_roundtrip(self, tmp_path):
        rng = np.random.default_rng(8)
        model = lsa_fit(rng.standard_normal((9, 7)), 3)
        path = tmp_path / "model.lsa"
        save_lsa(model, path)
        loaded = load_lsa(path)
        assert np.array_equal(loaded.components, model.components)
        assert np.array_equal(loaded.singular_values, model.singular_values)
        assert path.read_bytes()[:4] == b"LSA1"


def _blobs(n_per=20, dim=6, separation=10.0, seed=42):
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, 1.0, size=(n_per, dim))
    b = rng.normal(0.0, 1.0, size=(n_per, dim))
    b[:, 0] += separation
    return np.vstack([a, b]), np.array([0] * n_per + [1] * n_per)


class TestUmap:
    def test_blob_separation_1nn(self):
        X, labels = _blobs()
        emb = umap_fit_transform(X, UmapConfig(n_neighbors=10, n_components=2, seed=1))
        D = pairwise_distances(emb)
        np.fill_diagonal(D, np.inf)
        assert (labels[D.argmin(axis=1)] == labels).all()

    def test_duplicates_identical(self):
        X, _ = _blobs(n_per=10)
        X = np.vstack([X, X[:4]])
        emb = umap_fit_transform(
            X, UmapConfig(n_neighbors=6, n_components=2, n_epochs=50, seed=3)
        )
        for i in range(4):
            assert np.array_equal(emb[20 + i], emb[i])

    def test_deterministic(self):
        X, _ = _blobs(n_per=12)
        cfg = UmapConfig(n_neighbors=8, n_components=3, n_epochs=60, seed=9)
        assert np.array_equal(umap_fit_transform(X, cfg), umap_fit_transform(X, cfg))

    def test_n_neighbors_bound(self):
        X, _ = _blobs(n_per=4)
        with pytest.raises(DataError):
            umap_fit_transform(X, UmapConfig(n_neighbors=8, n_components=2))

    def test_graph_symmetric_unit_range(self):
        X, _ = _blobs(n_per=15)
        W = fuzzy_graph(X, 8)
        assert np.allclose(W, W.T)
        assert W.min() >= 0.0 and W.max() <= 1.0 + 1e-12

    def test_calibration_hits_target(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((30, 4))
        D = pairwise_distances(X)
        order = np.argsort(D, axis=1, kind="stable")
        k = 10
        knn = np.take_along_axis(D, order[:, 1 : k + 1], axis=1)
        sigma, rho = smooth_knn_calibration(knn, k)
        np.testing.assert_allclose(rho, knn[:, 0])
        sums = np.exp(
            -np.maximum(knn - rho[:, None], 0.0) / sigma[:, None]
        ).sum(axis=1)
        np.testing.assert_allclose(sums, np.log2(k), atol=1e-6)

    def test_output_curve_reference_values(self):
        a, b = fit_output_curve(0.1)
        # canonical values for min_dist=0.1, spread=1.0
        assert a == pytest.approx(1.577, abs=0.01)
        assert b == pytest.approx(0.8951, abs=0.01)

    def test_trustworthiness_on_blobs(self):
        X, _ = _blobs(n_per=20, dim=3)
        emb = umap_fit_transform(
            X, UmapConfig(n_neighbors=10, n_components=2, n_epochs=500, seed=3)
        )
        assert trustworthiness(X, emb, k=5) >= 0.95
