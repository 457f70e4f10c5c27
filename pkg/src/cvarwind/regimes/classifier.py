"""Field -> mode classification pipeline and its JSON persistence."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..data import ModeSeries
from ..exceptions import DomainError, ParseError
from .fields import FieldStack
from .kmeans import ModeGrouping, kmeans_nodes
from .preprocessing import PCAReducer, Standardizer
from .som import SelfOrganizingMap, bmu_indices

FORMAT_VERSION = 1


def assign_modes(som, grouping: ModeGrouping, pca: PCAReducer, fields, scaler: Standardizer | None = None):
    """Mode label of every row: grouping of the BMU of the PC scores.

    ``fields`` must already be standardised unless ``scaler`` is given.
    Returns a :class:`ModeSeries` for a :class:`FieldStack` input and a
    label array otherwise.
    """
    X = fields.data if isinstance(fields, FieldStack) else np.asarray(fields, dtype=float)
    if scaler is not None:
        X = scaler.transform(X)
    scores = pca.transform(X)
    weights = som.weights_ if hasattr(som, "weights_") else np.asarray(som)
    if scores.shape[1] != weights.shape[1]:
        raise DomainError("PCA and SOM dimensions disagree")
    labels = grouping.assignment[bmu_indices(weights, scores)]
    if isinstance(fields, FieldStack):
        return ModeSeries(fields.start, fields.step, labels, grouping.n_modes)
    return labels


class ModeClassifier(BaseEstimator):
    """Standardise -> PCA -> SOM -> k-means grouping of SOM nodes.

    ``fit`` trains the SOM once and groups its nodes for every ``k`` in
    ``n_modes_range`` (always including ``n_modes``); ``predict`` labels rows
    with the grouping selected by ``n_modes`` unless another ``k`` is given.

    With ``weight_by_hits`` the node clustering weights each node by the
    number of training rows it is BMU for, so sparsely hit nodes lying
    between clusters cannot form a mode of their own.
    """

    def __init__(
        self,
        n_modes=3,
        n_modes_range=None,
        variance_threshold=0.95,
        n_rows=3,
        n_cols=7,
        n_epochs=10,
        sigma_end=0.5,
        learning_rate_start=0.5,
        learning_rate_end=0.01,
        kmeans_restarts=10,
        weight_by_hits=True,
        random_state=0,
    ):
        self.n_modes = n_modes
        self.n_modes_range = n_modes_range
        self.variance_threshold = variance_threshold
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.n_epochs = n_epochs
        self.sigma_end = sigma_end
        self.learning_rate_start = learning_rate_start
        self.learning_rate_end = learning_rate_end
        self.kmeans_restarts = kmeans_restarts
        self.weight_by_hits = weight_by_hits
        self.random_state = random_state

    def fit(self, fields, y=None):
        X = fields.data if isinstance(fields, FieldStack) else fields
        self.scaler_ = Standardizer().fit(X)
        Z = self.scaler_.transform(X)
        self.pca_ = PCAReducer(self.variance_threshold).fit(Z)
        scores = self.pca_.transform(Z)
        self.som_ = SelfOrganizingMap(
            self.n_rows,
            self.n_cols,
            n_epochs=self.n_epochs,
            sigma_end=self.sigma_end,
            learning_rate_start=self.learning_rate_start,
            learning_rate_end=self.learning_rate_end,
            random_state=self.random_state,
        ).fit(scores)
        self.hits_ = np.bincount(self.som_.predict(scores), minlength=self.som_.n_nodes)
        node_weights = self.hits_ if self.weight_by_hits else None
        ks = sorted(set(self.n_modes_range or []) | {self.n_modes})
        self.groupings_ = {
            k: kmeans_nodes(self.som_, k, self.kmeans_restarts, self.random_state, node_weights)
            for k in ks
        }
        return self

    def grouping(self, k=None) -> ModeGrouping:
        check_is_fitted(self, "groupings_")
        k = self.n_modes if k is None else k
        if k not in self.groupings_:
            raise DomainError(f"no grouping with {k} modes was fitted")
        return self.groupings_[k]

    def predict(self, fields, k=None):
        return assign_modes(self.som_, self.grouping(k), self.pca_, fields, self.scaler_)

    def scores(self, fields) -> np.ndarray:
        X = fields.data if isinstance(fields, FieldStack) else fields
        return self.pca_.transform(self.scaler_.transform(X))

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        check_is_fitted(self, "groupings_")
        return {
            "format_version": FORMAT_VERSION,
            "params": {
                **self.get_params(),
                "n_modes_range": None if self.n_modes_range is None else [int(k) for k in self.n_modes_range],
            },
            "standardizer": {
                "n_features_in": int(self.scaler_.n_features_in_),
                "support": self.scaler_.support_.tolist(),
                "mean": self.scaler_.mean_.tolist(),
                "scale": self.scaler_.scale_.tolist(),
            },
            "pca": {
                "mean": self.pca_.mean_.tolist(),
                "loadings": self.pca_.loadings_.tolist(),
                "explained_variance_ratio": self.pca_.explained_variance_ratio_.tolist(),
            },
            "som": {
                "n_rows": self.som_.n_rows,
                "n_cols": self.som_.n_cols,
                "topology": "hexagonal",
                "weights": self.som_.weights_.tolist(),
                "quantization_errors": list(self.som_.quantization_errors_),
                "hits": self.hits_.tolist(),
                "schedule": self.som_.get_params(),
            },
            "groupings": {
                str(k): {
                    "method": g.method,
                    "assignment": g.assignment.tolist(),
                    "centroids": np.asarray(g.centroids).tolist(),
                    "wcss": g.wcss,
                }
                for k, g in self.groupings_.items()
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModeClassifier":
        if doc.get("format_version") != FORMAT_VERSION:
            raise ParseError(f"unsupported classifier format {doc.get('format_version')!r}")
        try:
            clf = cls(**doc["params"])
            s = doc["standardizer"]
            clf.scaler_ = Standardizer()
            clf.scaler_.support_ = np.array(s["support"], dtype=bool)
            clf.scaler_.mean_ = np.array(s["mean"], dtype=float)
            clf.scaler_.scale_ = np.array(s["scale"], dtype=float)
            clf.scaler_.n_features_in_ = s["n_features_in"]
            p = doc["pca"]
            clf.pca_ = PCAReducer(clf.variance_threshold)
            clf.pca_.mean_ = np.array(p["mean"], dtype=float)
            clf.pca_.loadings_ = np.array(p["loadings"], dtype=float).reshape(len(p["mean"]), -1)
            clf.pca_.explained_variance_ratio_ = np.array(p["explained_variance_ratio"])
            clf.pca_.n_components_ = clf.pca_.loadings_.shape[1]
            clf.pca_.n_features_in_ = clf.pca_.mean_.size
            m = doc["som"]
            clf.som_ = SelfOrganizingMap(**m["schedule"])
            clf.som_.weights_ = np.array(m["weights"], dtype=float)
            clf.som_.quantization_errors_ = m["quantization_errors"]
            clf.som_.n_features_in_ = clf.som_.weights_.shape[1]
            clf.hits_ = np.array(m["hits"], dtype=np.int64)
            clf.groupings_ = {
                int(k): ModeGrouping(int(k), g["assignment"], np.array(g["centroids"]), g["wcss"], g["method"])
                for k, g in doc["groupings"].items()
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed classifier document: {exc}") from exc
        return clf

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "ModeClassifier":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(doc)
