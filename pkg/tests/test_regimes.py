import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.metrics import davies_bouldin_score

from conftest import make_modes
from cvarwind.data import HOUR
from cvarwind.exceptions import DomainError, ParseError
from cvarwind.regimes import (
    FieldStack,
    ModeClassifier,
    ModeGrouping,
    NodeKMeans,
    SelfOrganizingMap,
    Standardizer,
    assign_modes,
    davies_bouldin,
    kmeans_nodes,
    load_fields,
    mode_stats,
    pca_fit,
    pca_project,
    run_lengths,
    som_bmu,
    som_train,
    standardize,
    write_fields,
)

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def fitted_som(weights):
    som = SelfOrganizingMap(1, len(weights))
    som.weights_ = np.asarray(weights, dtype=float)
    som.n_features_in_ = som.weights_.shape[1]
    return som


# -- standardisation ---------------------------------------------------------


class TestStandardize:
    def test_hand_example(self):
        Z, scaler = standardize(np.array([[1.0], [2.0], [3.0]]))
        np.testing.assert_allclose(Z[:, 0], [-1.0, 0.0, 1.0], atol=1e-12)
        assert scaler.scale_[0] == pytest.approx(1.0)

    def test_idempotent(self):
        X = np.random.default_rng(0).normal(3, 2, size=(50, 4))
        Z, _ = standardize(X)
        Z2, _ = standardize(Z)
        np.testing.assert_allclose(Z2, Z, atol=1e-10)

    def test_moments(self):
        X = np.random.default_rng(1).gamma(2.0, size=(40, 6))
        Z, _ = standardize(X)
        np.testing.assert_allclose(Z.mean(axis=0), 0, atol=1e-10)
        np.testing.assert_allclose(Z.std(axis=0, ddof=1), 1, atol=1e-10)

    def test_constant_column_dropped(self, caplog):
        X = np.column_stack([np.arange(5.0), np.full(5, 7.0), np.arange(5.0) ** 2])
        Z, scaler = standardize(X)
        assert Z.shape == (5, 2)
        np.testing.assert_array_equal(scaler.support_, [True, False, True])
        assert "constant" in caplog.text

    @settings(max_examples=30, deadline=None)
    @given(arrays(float, (12, 3), elements=finite))
    def test_idempotent_property(self, X):
        scaler = Standardizer().fit(X)
        Z = scaler.transform(X)
        if Z.shape[1] == 0 or np.any(Z.std(axis=0, ddof=1) < 1e-6):
            return
        Z2 = Standardizer().fit_transform(Z)
        np.testing.assert_allclose(Z2, Z, atol=1e-8)


# -- PCA -------------------------------------------------------------------


class TestPCA:
    def test_rank_one_data(self):
        t = np.linspace(-1, 1, 20)
        X = np.column_stack([t, 2 * t])
        pca = pca_fit(X, 0.95)
        assert pca.n_components_ == 1
        assert pca.explained_variance_ratio_[0] == pytest.approx(1.0)

    def test_isotropic_cloud_against_eigh(self):
        X = np.random.default_rng(3).normal(size=(500, 2))
        pca = pca_fit(X, 0.95)
        evals = np.linalg.eigvalsh(np.cov(X.T))[::-1]
        ratio = evals / evals.sum()
        expected_k = int(np.searchsorted(np.cumsum(ratio), 0.95) + 1)
        assert pca.n_components_ == expected_k == 2
        np.testing.assert_allclose(pca.explained_variance_ratio_, ratio, atol=1e-12)

    def test_full_threshold_keeps_all(self):
        X = np.random.default_rng(4).normal(size=(30, 5))
        assert pca_fit(X, 1.0).n_components_ == 5

    def test_reconstruction_with_all_components(self):
        X = np.random.default_rng(5).normal(size=(30, 6))
        pca = pca_fit(X, 0.5)
        scores = (X - pca.mean_) @ pca.all_loadings_
        np.testing.assert_allclose(scores @ pca.all_loadings_.T + pca.mean_, X, atol=1e-8)

    def test_orthonormal_and_sorted(self):
        X = np.random.default_rng(6).normal(size=(60, 8)) @ np.random.default_rng(7).normal(size=(8, 8))
        pca = pca_fit(X, 0.99)
        L = pca.loadings_
        np.testing.assert_allclose(L.T @ L, np.eye(L.shape[1]), atol=1e-8)
        r = pca.explained_variance_ratio_
        assert np.all(np.diff(r) <= 1e-15) and np.all(r > 0) and r.sum() <= 1 + 1e-12

    def test_k_is_smallest_reaching_threshold(self):
        X = np.random.default_rng(8).normal(size=(80, 6)) * np.array([5, 4, 3, 2, 1, 0.5])
        for thr in (0.3, 0.6, 0.9, 0.99):
            pca = pca_fit(X, thr)
            cum = np.cumsum(pca.all_explained_variance_ratio_)
            k = pca.n_components_
            assert cum[k - 1] >= thr - 1e-12
            assert k == 1 or cum[k - 2] < thr

    def test_projection_examples(self):
        X = np.random.default_rng(9).normal(size=(40, 4))
        pca = pca_fit(X, 1.0)
        np.testing.assert_allclose(pca_project(pca, pca.mean_[None, :]), 0, atol=1e-12)
        row = pca.mean_ + 2.5 * pca.loadings_[:, 0]
        expected = np.zeros(pca.n_components_)
        expected[0] = 2.5
        np.testing.assert_allclose(pca_project(pca, row[None, :])[0], expected, atol=1e-12)
        np.testing.assert_allclose(pca_project(pca, X), pca.transform(X))

    def test_errors(self):
        X = np.random.default_rng(10).normal(size=(10, 3))
        for bad in (0.0, 1.5, -0.1):
            with pytest.raises(DomainError):
                pca_fit(X, bad)
        with pytest.raises(DomainError):
            pca_project(pca_fit(X), np.ones((2, 4)))


# -- SOM -------------------------------------------------------------------


class TestSOM:
    def test_bmu_exact_node(self):
        som = som_train(np.random.default_rng(0).normal(size=(200, 3)), 3, 7, n_epochs=2)
        node = 1 * 7 + 4  # lattice position (1, 4)
        assert som_bmu(som, som.weights_[node]) == node

    def test_bmu_tie_goes_to_lowest_index(self):
        w = np.zeros((8, 1))
        w[:, 0] = 100 + np.arange(8)
        w[3, 0], w[7, 0] = -1.0, 1.0
        assert som_bmu(fitted_som(w), [0.0]) == 3

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, (21, 3), elements=finite), arrays(float, (3,), elements=finite))
    def test_bmu_brute_force(self, weights, x):
        d = [np.sqrt(np.sum((x - w) ** 2)) for w in weights]
        best = min(range(len(d)), key=lambda j: (d[j], j))
        got = som_bmu(fitted_som(weights), x)
        assert d[got] == d[best]

    def test_deterministic(self):
        X = np.random.default_rng(1).normal(size=(300, 4))
        a = som_train(X, random_state=5)
        b = som_train(X, random_state=5)
        assert a.weights_.tobytes() == b.weights_.tobytes()
        assert a.quantization_errors_ == b.quantization_errors_
        c = som_train(X, random_state=6)
        assert c.weights_.tobytes() != a.weights_.tobytes()

    def test_fixed_point(self):
        x = np.array([1.5, -2.0, 0.25])
        X = np.tile(x, (30, 1))
        som = som_train(X, 3, 7, n_epochs=3, sigma_end=0.0, learning_rate_end=0.0)
        assert np.abs(som.weights_[som_bmu(som, x)] - x).max() < 1e-6

    def test_two_clusters_match_kmeans(self):
        rng = np.random.default_rng(2)
        a = rng.normal([0, 0], 0.3, size=(150, 2))
        b = rng.normal([8, 8], 0.3, size=(150, 2))
        X = np.vstack([a, b])
        som = som_train(X, 1, 2, n_epochs=20, sigma_end=0.0)
        km = NodeKMeans(2, random_state=0).fit(X)
        for w in som.weights_:
            cluster = a if np.linalg.norm(w) < np.linalg.norm(w - 8) else b
            assert np.all(w >= cluster.min(axis=0)) and np.all(w <= cluster.max(axis=0))
            nearest = np.min(np.linalg.norm(km.cluster_centers_ - w, axis=1))
            assert nearest < 0.25

    def test_quantization_error_history(self, fixture_classifier):
        # reference synthetic dataset: PC scores of the shipped fixture fields
        qe = fixture_classifier.som_.quantization_errors_
        assert len(qe) == fixture_classifier.n_epochs + 1
        assert qe[-1] < qe[0]

    def test_hex_lattice_neighbours(self):
        som = som_train(np.random.default_rng(0).normal(size=(50, 2)), 3, 7, n_epochs=1)
        c = som.coordinates_
        d = np.linalg.norm(c[:, None] - c[None, :], axis=2)
        interior = 1 * 7 + 3
        assert np.sum(np.isclose(d[interior], 1.0)) == 6

    def test_errors(self):
        X = np.random.default_rng(0).normal(size=(50, 2))
        with pytest.raises(DomainError):
            SelfOrganizingMap(0, 7).fit(X)
        with pytest.raises(DomainError):
            SelfOrganizingMap(3, 7).fit(X[:10])
        with pytest.raises(DomainError):
            SelfOrganizingMap(3, 7, n_epochs=0).fit(X)
        som = som_train(X, n_epochs=1)
        with pytest.raises(DomainError):
            som_bmu(som, [1.0, 2.0, 3.0])


# -- k-means and Davies-Bouldin ---------------------------------------------


def exhaustive_partition(X, k):
    """Minimum-WCSS partition of the rows of X into k non-empty groups."""
    best = (np.inf, None)
    for labels in itertools.product(range(k), repeat=len(X)):
        labels = np.array(labels)
        if len(set(labels)) < k:
            continue
        wcss = sum(((X[labels == j] - X[labels == j].mean(axis=0)) ** 2).sum() for j in range(k))
        if wcss < best[0]:
            best = (wcss, labels)
    return best


def as_partition(labels):
    return {frozenset(np.flatnonzero(labels == v).tolist()) for v in np.unique(labels)}


class TestKMeans:
    def test_saturation(self):
        W = np.random.default_rng(0).normal(size=(21, 3))
        g = kmeans_nodes(W, 21)
        assert sorted(g.assignment) == list(range(1, 22))
        assert g.wcss == pytest.approx(0.0, abs=1e-20)

    def test_single_cluster(self):
        W = np.random.default_rng(0).normal(size=(21, 3))
        g = kmeans_nodes(W, 1)
        assert set(g.assignment) == {1}
        np.testing.assert_allclose(g.centroids[0], W.mean(axis=0))

    def test_worked_example(self):
        W = np.array([[0.0], [0.1], [10.0], [10.1]])
        g = kmeans_nodes(W, 2)
        np.testing.assert_array_equal(g.assignment, [1, 1, 2, 2])
        np.testing.assert_allclose(g.centroids[:, 0], [0.05, 10.05])
        wcss, labels = exhaustive_partition(W, 2)
        assert as_partition(g.assignment) == as_partition(labels)
        assert g.wcss == pytest.approx(wcss)

    @pytest.mark.parametrize("seed", range(8))
    def test_exhaustive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        centres = rng.normal(scale=10, size=(3, 2))
        X = np.vstack([c + rng.normal(scale=0.5, size=(2, 2)) for c in centres])
        X = np.vstack([X, centres[0] + 0.1])
        wcss, labels = exhaustive_partition(X, 3)
        g = kmeans_nodes(X, 3, random_state=seed)
        assert g.wcss == pytest.approx(wcss, rel=1e-9)

    def test_wcss_monotone(self):
        for seed in range(100):
            X = np.random.default_rng(seed).normal(size=(21, 4))
            km = NodeKMeans(4, n_init=1, random_state=seed).fit(X)
            h = np.array(km.inertia_history_)
            assert np.all(np.diff(h) <= 1e-12 * h[0])

    def test_canonical_labels(self):
        X = np.array([[10.0], [0.0], [10.1], [0.1], [5.0]])
        g = kmeans_nodes(X, 3)
        assert g.assignment[0] == 1
        first_seen = [int(np.flatnonzero(g.assignment == m)[0]) for m in (1, 2, 3)]
        assert first_seen == sorted(first_seen)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(11)
        X = np.vstack([rng.normal(c, 0.2, size=(7, 2)) for c in ([0, 0], [5, 0], [0, 5])])
        base = kmeans_nodes(X, 3)
        perm = rng.permutation(len(X))
        other = kmeans_nodes(X[perm], 3)
        back = np.empty_like(other.assignment)
        back[perm] = other.assignment
        assert as_partition(back) == as_partition(base.assignment)

    def test_empty_cluster_reseed(self):
        # duplicate points force empty clusters during Lloyd iterations
        X = np.array([[0.0], [0.0], [0.0], [0.0], [1.0]])
        km = NodeKMeans(3, n_init=3, random_state=0).fit(X)
        assert sorted(set(km.labels_)) == [1, 2, 3]

    def test_hit_weights_ignore_empty_nodes(self):
        X = np.array([[0.0], [0.1], [5.0], [10.0], [10.1]])
        w = np.array([50, 50, 0, 50, 50])
        g = kmeans_nodes(X, 2, node_weights=w)
        assert g.assignment[0] == g.assignment[1] != g.assignment[3] == g.assignment[4]

    def test_k_out_of_range(self):
        with pytest.raises(DomainError):
            kmeans_nodes(np.zeros((3, 1)), 4)
        with pytest.raises(DomainError):
            kmeans_nodes(np.zeros((3, 1)), 0)

    def test_grouping_needs_every_mode(self):
        with pytest.raises(DomainError):
            ModeGrouping(3, [1, 1, 2], np.zeros((3, 1)))


class TestDaviesBouldin:
    def test_worked_example(self):
        X = np.array([[0, 0], [0, 1], [4, 0], [4, 1]], dtype=float)
        assert abs(davies_bouldin(X, [1, 1, 2, 2]) - 0.25) <= 1e-12

    def test_singletons(self):
        assert davies_bouldin(np.array([[0.0], [3.0]]), [1, 2]) == 0.0

    def test_duplicate_centroids(self):
        with pytest.raises(DomainError):
            davies_bouldin(np.array([[0.0], [2.0], [1.0], [1.0]]), [1, 1, 2, 2])

    def test_single_cluster(self):
        with pytest.raises(DomainError):
            davies_bouldin(np.zeros((3, 2)), [1, 1, 1])

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, (12, 2), elements=finite), st.floats(0.01, 100))
    def test_matches_sklearn_and_scales(self, X, c):
        labels = np.repeat([1, 2, 3], 4)
        centres = np.array([X[labels == g].mean(axis=0) for g in (1, 2, 3)])
        gaps = np.linalg.norm(centres[:, None] - centres[None], axis=2)[np.triu_indices(3, 1)]
        if gaps.min() < 1e-6:
            return
        db = davies_bouldin(X, labels)
        assert db >= 0
        assert db == pytest.approx(davies_bouldin_score(X, labels), rel=1e-9)
        assert davies_bouldin(c * X, labels) == pytest.approx(db, rel=1e-9)


# -- assignment and statistics ----------------------------------------------


def small_fields(T=300, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.repeat(rng.integers(0, 3, size=T // 10), 10)
    centres = rng.normal(scale=4, size=(3, 12))
    data = centres[labels] + rng.normal(scale=0.3, size=(T, 12))
    return FieldStack("2002-01-01", HOUR, ("SLP", "Z500"), [50.0, 51.0], [0.0, 1.0, 2.0], data)


class TestAssignModes:
    def test_composition_oracle(self):
        fields = small_fields()
        clf = ModeClassifier(n_modes=3, n_epochs=3).fit(fields)
        modes = clf.predict(fields)
        Z = (fields.data - clf.scaler_.mean_) / clf.scaler_.scale_
        scores = pca_project(clf.pca_, Z)
        expected = [clf.grouping().assignment[som_bmu(clf.som_, s)] for s in scores]
        np.testing.assert_array_equal(modes.labels, expected)
        assert len(modes) == len(fields) and set(modes.labels) <= {1, 2, 3}
        assert modes.start == fields.start

    def test_node_preimage(self):
        fields = small_fields()
        clf = ModeClassifier(n_modes=3, n_epochs=3).fit(fields)
        g = clf.grouping()
        node = int(np.flatnonzero(g.assignment == 2)[0])
        z = clf.pca_.inverse_transform(clf.som_.weights_[node][None, :])
        row = z * clf.scaler_.scale_ + clf.scaler_.mean_
        assert clf.predict(row)[0] == 2

    def test_single_mode(self):
        fields = small_fields()
        clf = ModeClassifier(n_modes=1, n_epochs=2).fit(fields)
        assert set(clf.predict(fields).labels) == {1}

    def test_dimension_mismatch(self):
        fields = small_fields()
        clf = ModeClassifier(n_modes=2, n_epochs=1).fit(fields)
        with pytest.raises(DomainError):
            assign_modes(clf.som_, clf.grouping(), clf.pca_, np.ones((3, 5)))

    def test_persistence_round_trip(self, tmp_path):
        fields = small_fields()
        clf = ModeClassifier(n_modes=3, n_modes_range=range(1, 5), n_epochs=2).fit(fields)
        clf.save(tmp_path / "clf.json")
        doc = json.loads((tmp_path / "clf.json").read_text())
        assert doc["format_version"] == 1 and doc["som"]["topology"] == "hexagonal"
        again = ModeClassifier.load(tmp_path / "clf.json")
        for k in range(1, 5):
            np.testing.assert_array_equal(again.predict(fields, k).labels, clf.predict(fields, k).labels)

    def test_corrupt_document(self, tmp_path):
        (tmp_path / "bad.json").write_text("{not json")
        with pytest.raises(ParseError):
            ModeClassifier.load(tmp_path / "bad.json")
        with pytest.raises(ParseError):
            ModeClassifier.from_dict({"format_version": 99})


class TestModeStats:
    def test_example(self):
        stats = mode_stats(make_modes([1, 1, 2, 2, 2, 1]))
        np.testing.assert_array_equal(stats.durations[1], [2, 1])
        np.testing.assert_array_equal(stats.durations[2], [3])
        np.testing.assert_allclose(stats.frequency, [0.5, 0.5])

    def test_constant(self):
        stats = mode_stats(make_modes(np.ones(17, dtype=int)))
        np.testing.assert_array_equal(stats.durations[1], [17])
        assert stats.mean_duration_hours(1) == 17.0

    @given(st.lists(st.integers(1, 4), min_size=1, max_size=200))
    def test_totals(self, labels):
        modes = make_modes(labels, n_modes=4)
        stats = mode_stats(modes)
        assert sum(d.sum() for d in stats.durations.values()) == len(labels)
        assert stats.frequency.sum() == pytest.approx(1.0)
        for m in range(1, 5):
            assert stats.durations[m].sum() == labels.count(m)
            assert all(d >= 1 for d in stats.durations[m])
        values, lengths = run_lengths(labels)
        assert np.all(values[1:] != values[:-1])

    def test_monthly_shares(self):
        labels = np.ones(24 * 59, dtype=int)  # Jan + Feb 2002
        stats = mode_stats(make_modes(labels))
        assert stats.monthly[0, 0] == pytest.approx(31 / 59)
        assert stats.monthly[0].sum() == pytest.approx(1.0)


class TestFieldFiles:
    def test_round_trip(self, tmp_path):
        fields = small_fields(T=30)
        written = write_fields(fields, tmp_path / "f.json")
        assert len(written) == 3
        meta = json.loads((tmp_path / "f.json").read_text())
        assert meta["variables"] == ["SLP", "Z500"]
        header = written[1].read_text().splitlines()[0]
        assert header == "timestamp," + ",".join(f"cell_{g}" for g in range(6))
        again = load_fields(tmp_path / "f.json")
        np.testing.assert_allclose(again.data, fields.data, atol=5e-7)
        assert again.variables == fields.variables and again.start == fields.start

    def test_missing_variable_file(self, tmp_path):
        fields = small_fields(T=30)
        written = write_fields(fields, tmp_path / "f.json")
        written[-1].unlink()
        with pytest.raises(FileNotFoundError) as info:
            load_fields(tmp_path / "f.json")
        assert written[-1].name in str(info.value)
