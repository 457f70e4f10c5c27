"""k-means grouping of SOM nodes and the Davies-Bouldin index."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import DomainError

logger = logging.getLogger(__name__)


def _sq_dist(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _wcss(X, labels, centers, w):
    return float((w * ((X - centers[labels]) ** 2).sum(axis=1)).sum())


def canonical_labels(labels) -> np.ndarray:
    """Renumber labels ``1..k`` in order of first occurrence."""
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    mapping = {old: new for new, old in enumerate(order, start=1)}
    return np.array([mapping[v] for v in labels], dtype=np.int64)


def _plusplus_init(X, k, rng, w):
    n = X.shape[0]
    candidates = np.flatnonzero(w > 0)
    idx = [int(rng.choice(candidates))]
    d2 = _sq_dist(X, X[idx]).min(axis=1)
    while len(idx) < k:
        score = d2 * w
        total = score.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=score / total))
        else:
            unused = np.setdiff1d(np.arange(n), idx)
            nxt = int(unused[0])
        idx.append(nxt)
        d2 = np.minimum(d2, _sq_dist(X, X[[nxt]])[:, 0])
    return X[idx].copy()


def _lloyd(X, centers, max_iter, w):
    """Run weighted Lloyd iterations; returns labels, centers, WCSS history, reseed count."""
    k = centers.shape[0]
    labels = None
    history = []
    reseeds = 0
    for _ in range(max_iter):
        new = _sq_dist(X, centers).argmin(axis=1)
        mass = np.bincount(new, weights=w, minlength=k)
        members = np.bincount(new[w > 0], minlength=k)
        for j in np.flatnonzero(mass == 0):
            # move the worst-fitted point of a multi-member cluster into j
            own = w * ((X - centers[new]) ** 2).sum(axis=1)
            own[(members[new] <= 1) | (w == 0)] = -1.0
            far = int(own.argmax())
            members[new[far]] -= 1
            mass[new[far]] -= w[far]
            new[far] = j
            members[j] = 1
            mass[j] = w[far]
            reseeds += 1
        centers = np.array([np.average(X[new == j], axis=0, weights=w[new == j]) for j in range(k)])
        history.append(_wcss(X, new, centers, w))
        if labels is not None and np.array_equal(new, labels):
            labels = new
            break
        labels = new
    return labels, centers, history, reseeds


@dataclass(frozen=True)
class ModeGrouping:
    """Assignment of SOM nodes to modes ``1..n_modes``."""

    n_modes: int
    assignment: np.ndarray
    centroids: np.ndarray = field(repr=False)
    wcss: float = 0.0
    method: str = "kmeans"

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        present = set(a.tolist())
        if present != set(range(1, self.n_modes + 1)):
            raise DomainError("every mode must own at least one node and labels must be 1..M")
        object.__setattr__(self, "assignment", a)

    def __getitem__(self, node):
        return self.assignment[node]


class NodeKMeans(ClusterMixin, BaseEstimator):
    """Lloyd's k-means with k-means++ seeding and seeded restarts.

    Labels are 1-based and canonicalised by first occurrence, so reruns and
    reorderings of equivalent solutions compare equal. Optional sample
    weights scale each row's contribution to centroids and WCSS; rows with
    zero weight never seed a centroid and simply join the nearest one.

    Parameters
    ----------
    n_clusters : int, default=3
    n_init : int, default=10
        Number of seeded restarts; the lowest final WCSS is kept.
    max_iter : int, default=100
    random_state : int, default=0

    Attributes
    ----------
    labels_ : ndarray of int, 1-based
    cluster_centers_ : ndarray of shape (n_clusters, K)
        Row ``j`` is the centroid of label ``j + 1``.
    inertia_ : float
    inertia_history_ : list of float
        WCSS after every Lloyd iteration of the kept restart.
    n_reseeds_ : int
        Empty-cluster repairs over all restarts.
    """

    def __init__(self, n_clusters=3, n_init=10, max_iter=100, random_state=0):
        self.n_clusters = n_clusters
        self.n_init = n_init
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None, sample_weight=None):
        X = check_array(X, dtype=np.float64)
        k = self.n_clusters
        w = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        if w.shape != (X.shape[0],) or np.any(w < 0):
            raise DomainError("sample_weight must be non-negative, one per row")
        if not 1 <= k <= int((w > 0).sum()):
            raise DomainError(f"n_clusters must lie in 1..{int((w > 0).sum())} (rows with positive weight)")
        rng = np.random.default_rng(self.random_state)
        best = None
        self.n_reseeds_ = 0
        for _ in range(max(1, self.n_init)):
            centers = _plusplus_init(X, k, rng, w)
            labels, centers, history, reseeds = _lloyd(X, centers, self.max_iter, w)
            self.n_reseeds_ += reseeds
            if best is None or history[-1] < best[2][-1] - 1e-12 * max(1.0, best[2][-1]):
                best = (labels, centers, history)
        if self.n_reseeds_:
            logger.info("k-means re-seeded %d empty cluster(s)", self.n_reseeds_)
        labels, centers, history = best
        canon = canonical_labels(labels)
        order = [int(labels[np.flatnonzero(canon == j)[0]]) for j in range(1, k + 1)]
        self.labels_ = canon
        self.cluster_centers_ = centers[order]
        self.inertia_ = history[-1]
        self.inertia_history_ = history
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=np.float64)
        return _sq_dist(X, self.cluster_centers_).argmin(axis=1) + 1


def kmeans_nodes(som, k, restarts=10, random_state=0, node_weights=None) -> ModeGrouping:
    """Group the node weight vectors of a fitted SOM into ``k`` modes.

    ``node_weights`` (e.g. BMU hit counts) weights each node in the
    clustering; by default all nodes count equally.
    """
    weights = som.weights_ if hasattr(som, "weights_") else np.asarray(som)
    km = NodeKMeans(k, n_init=restarts, random_state=random_state).fit(weights, sample_weight=node_weights)
    return ModeGrouping(k, km.labels_, km.cluster_centers_, km.inertia_)


def davies_bouldin(points, labels) -> float:
    """Davies-Bouldin index with mean member-to-centroid distance as scatter."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(labels)
    groups = np.unique(labels)
    if groups.size < 2:
        raise DomainError("Davies-Bouldin needs at least two clusters")
    centers = np.array([X[labels == g].mean(axis=0) for g in groups])
    scatter = np.array([np.linalg.norm(X[labels == g] - c, axis=1).mean() for g, c in zip(groups, centers)])
    sep = np.sqrt(_sq_dist(centers, centers))
    np.fill_diagonal(sep, np.inf)
    if np.any(sep == 0):
        raise DomainError("coincident cluster centroids")
    ratio = (scatter[:, None] + scatter[None, :]) / sep
    return float(ratio.max(axis=1).mean())
