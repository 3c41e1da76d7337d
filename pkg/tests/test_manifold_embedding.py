import numpy as np
import pytest
import scipy.sparse as sp

from thalaparc.manifold import (
    fit_embedding,
    initial_placement,
    initialize_embedding,
    load_model,
    make_epochs_per_sample,
    optimize_layout,
    resolve_n_neighbors,
    transform_new,
)
from thalaparc.synthgen import gaussian_blobs, silhouette


def two_cliques(n_per=5, weight=1.0):
    n = 2 * n_per
    m = np.zeros((n, n))
    for block in (range(n_per), range(n_per, n)):
        for i in block:
            for j in block:
                if i != j:
                    m[i, j] = weight
    return sp.csr_matrix(m)


class TestSpectralInit:
    def test_disconnected_cliques_separate(self):
        # the first retained (Fiedler-like) coordinate is constant per clique
        # and distinct across cliques; later coordinates capture within-clique
        # variation from the next eigenvalue down
        graph = two_cliques()
        coords = initialize_embedding(graph, 2, seed=0)
        first = coords[:, 0]
        gap = abs(first[:5].mean() - first[5:].mean())
        spread = max(first[:5].std(), first[5:].std())
        assert gap > 100 * max(spread, 1e-9)

    def test_matches_dense_eigensolver_oracle(self):
        graph = two_cliques()
        coords = initialize_embedding(graph, 2, seed=0)
        # oracle: dense symmetric normalized Laplacian, bottom nontrivial vector
        w = graph.toarray()
        deg = w.sum(axis=1)
        scale = np.diag(1.0 / np.sqrt(deg))
        lap = np.eye(10) - scale @ w @ scale
        vals, vecs = np.linalg.eigh(lap)
        oracle = vecs[:, np.argsort(vals)[1]]
        for vector in (coords[:, 0], oracle):
            a, b = vector[:5], vector[5:]
            assert np.allclose(a, a.mean(), atol=1e-3 * np.abs(vector).max() + 1e-9)
            assert np.allclose(b, b.mean(), atol=1e-3 * np.abs(vector).max() + 1e-9)
            assert abs(a.mean() - b.mean()) > 1e-6

    def test_single_point_is_origin(self):
        coords = initialize_embedding(sp.csr_matrix((1, 1)), 3, seed=5)
        assert np.array_equal(coords, np.zeros((1, 3)))

    def test_fallback_noise_is_reproducible(self):
        # 2 points cannot host d+1 = 3 eigenvectors, forcing the fallback
        graph = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        a = initialize_embedding(graph, 2, seed=9)
        b = initialize_embedding(graph, 2, seed=9)
        assert np.array_equal(a, b)
        assert np.all(np.abs(a) <= 10.0)

    def test_radius_scaling(self):
        coords = initialize_embedding(two_cliques(), 2, seed=1)
        assert np.abs(coords).max() == pytest.approx(10.0, abs=0.01)

    def test_large_graph_sparse_path(self):
        X, _ = gaussian_blobs(600, 6, 4, 10.0, seed=0)
        from thalaparc.manifold import build_fuzzy_graph, knn_graph_exact

        fuzzy = build_fuzzy_graph(knn_graph_exact(X, 10))
        coords = initialize_embedding(fuzzy.matrix, 2, seed=0)
        assert coords.shape == (600, 2)
        assert np.all(np.isfinite(coords))


class TestLayout:
    def make_graph(self, seed=0):
        X, labels = gaussian_blobs(300, 10, 2, 14.0, seed=seed)
        from thalaparc.manifold import build_fuzzy_graph, knn_graph_exact

        return X, labels, build_fuzzy_graph(knn_graph_exact(X, 15))

    def test_epochs_zero_rejected(self):
        _X, _labels, fuzzy = self.make_graph()
        init = initialize_embedding(fuzzy.matrix, 2, seed=0)
        with pytest.raises(ValueError):
            optimize_layout(init, fuzzy.matrix, 0, 1.57, 0.89)

    def test_single_epoch_perturbs_finite(self):
        _X, _labels, fuzzy = self.make_graph()
        init = initialize_embedding(fuzzy.matrix, 2, seed=0)
        out = optimize_layout(init, fuzzy.matrix, 1, 1.57, 0.89, seed=1)
        assert np.all(np.isfinite(out))
        assert not np.array_equal(out, init)

    def test_two_blob_silhouette(self):
        scores = []
        for seed in (0, 1):
            X, labels, fuzzy = self.make_graph(seed)
            init = initialize_embedding(fuzzy.matrix, 2, seed=seed)
            out = optimize_layout(init, fuzzy.matrix, 150, 1.57, 0.89, seed=seed)
            scores.append(silhouette(out, labels))
        assert np.mean(scores) >= 0.8

    def test_sequential_determinism(self):
        _X, _labels, fuzzy = self.make_graph()
        init = initialize_embedding(fuzzy.matrix, 2, seed=3)
        a = optimize_layout(init, fuzzy.matrix, 40, 1.57, 0.89, seed=3, deterministic=True)
        b = optimize_layout(init, fuzzy.matrix, 40, 1.57, 0.89, seed=3, deterministic=True)
        assert np.array_equal(a, b)

    def test_parallel_mode_stays_finite(self):
        _X, labels, fuzzy = self.make_graph()
        init = initialize_embedding(fuzzy.matrix, 2, seed=0)
        out = optimize_layout(init, fuzzy.matrix, 60, 1.57, 0.89, seed=0, deterministic=False)
        assert np.all(np.isfinite(out))
        assert silhouette(out, labels) >= 0.5

    def test_epochs_per_sample_schedule(self):
        weights = np.array([1.0, 0.5, 0.25])
        eps = make_epochs_per_sample(weights, 100)
        assert np.allclose(eps, [1.0, 2.0, 4.0])


class TestModel:
    @pytest.fixture(scope="class")
    def trained(self):
        X, labels = gaussian_blobs(400, 12, 4, 12.0, seed=7)
        model = fit_embedding(X, d=2, n_neighbors=25, epochs=80, seed=7, deterministic=True)
        return X, labels, model

    def test_resolve_n_neighbors(self):
        assert resolve_n_neighbors(2000, 40000) == 2000
        assert resolve_n_neighbors(2000, 4500) == 300
        assert resolve_n_neighbors(2000, 100) == 15
        assert resolve_n_neighbors(2000, 12) == 11
        assert resolve_n_neighbors(50, 4500) == 50
        assert resolve_n_neighbors(2000, 100, auto_scale=False) == 99

    def test_model_shapes_and_finiteness(self, trained):
        X, _labels, model = trained
        assert model.embedding.shape == (400, 2)
        assert np.all(np.isfinite(model.embedding))
        assert model.n_neighbors == 25
        assert model.train_data.shape == X.shape

    def test_duplicate_point_lands_near_twin(self):
        # converged-budget measurement, per-seed median gap below 0.5 latent units
        for seed in range(5):
            X, _labels = gaussian_blobs(250, 12, 4, 12.0, seed=seed)
            model = fit_embedding(X, d=2, n_neighbors=15, epochs=1000, seed=seed, deterministic=True)
            out = transform_new(model, X[:30])
            gaps = np.linalg.norm(out - model.embedding[:30], axis=1)
            assert np.median(gaps) < 0.5

    def test_batch_self_transform_stays_in_clusters(self, trained):
        X, labels, model = trained
        out = transform_new(model, X)
        centroid_gap = min(
            np.linalg.norm(
                model.embedding[labels == a].mean(axis=0)
                - model.embedding[labels == b].mean(axis=0)
            )
            for a in range(4)
            for b in range(a + 1, 4)
        )
        displacement = np.linalg.norm(out - model.embedding, axis=1)
        assert displacement.mean() < centroid_gap

    def test_midpoint_initialization_on_tied_weights(self):
        embedding = np.array([[0.0, 0.0], [4.0, 0.0]])
        weights = sp.csr_matrix(np.array([[0.5, 0.5]]))
        assert np.allclose(initial_placement(weights, embedding), [[2.0, 0.0]])

    def test_transform_dimension_mismatch(self, trained):
        _X, _labels, model = trained
        with pytest.raises(ValueError):
            transform_new(model, np.zeros((3, model.ambient_dim + 1)))

    def test_save_load_round_trip(self, trained, tmp_path):
        _X, _labels, model = trained
        path = tmp_path / "model.tsv"
        model.save(path)
        loaded = load_model(path)
        assert np.array_equal(loaded.embedding, model.embedding)
        assert np.array_equal(loaded.train_data, model.train_data)
        assert np.array_equal(loaded.rho, model.rho)
        assert np.array_equal(loaded.sigma, model.sigma)
        assert (loaded.a, loaded.b, loaded.d) == (model.a, model.b, model.d)
        loaded.save(tmp_path / "model2.tsv")
        assert (tmp_path / "model.tsv").read_bytes() == (tmp_path / "model2.tsv").read_bytes()

    def test_fit_determinism_bytes(self, tmp_path):
        X, _labels = gaussian_blobs(200, 8, 3, 10.0, seed=1)
        for name in ("one", "two"):
            model = fit_embedding(X, d=2, n_neighbors=15, epochs=30, seed=5, deterministic=True)
            model.save(tmp_path / f"{name}.tsv")
        assert (tmp_path / "one.tsv").read_bytes() == (tmp_path / "two.tsv").read_bytes()

    def test_transform_determinism(self, trained):
        X, _labels, model = trained
        a = transform_new(model, X[:30], deterministic=True)
        b = transform_new(model, X[:30], deterministic=True)
        assert np.array_equal(a, b)
