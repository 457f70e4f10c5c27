"""Column standardisation and PCA reduction of field matrices."""

from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import DomainError
from .fields import FieldStack

logger = logging.getLogger(__name__)


def _as_matrix(X):
    if isinstance(X, FieldStack):
        X = X.data
    return check_array(X, dtype=np.float64)


class Standardizer(TransformerMixin, BaseEstimator):
    """Scale columns to zero mean and unit sample standard deviation.

    Columns with zero variance carry no information for classification and
    are dropped; ``support_`` marks the retained columns.

    Attributes
    ----------
    mean_ : ndarray of shape (n_kept,)
    scale_ : ndarray of shape (n_kept,)
        Sample standard deviation (denominator ``T - 1``).
    support_ : ndarray of bool, shape (n_features_in_,)
    """

    def fit(self, X, y=None):
        X = _as_matrix(X)
        if X.shape[0] < 2:
            raise DomainError("standardisation needs at least two rows")
        mean = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1)
        support = sd > 1e-12 * np.maximum(1.0, np.abs(mean))
        if not support.all():
            dropped = np.flatnonzero(~support).tolist()
            logger.warning("dropping %d constant column(s): %s", len(dropped), dropped[:10])
        self.support_ = support
        self.mean_ = mean[support]
        self.scale_ = sd[support]
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        X = _as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return (X[:, self.support_] - self.mean_) / self.scale_


def standardize(fields):
    """Standardise a field stack or matrix.

    Returns the standardised data (same type as the input when it is a
    :class:`FieldStack` with no dropped columns, otherwise an ndarray) and
    the fitted :class:`Standardizer` holding the per-column statistics.
    """
    scaler = Standardizer().fit(fields)
    Z = scaler.transform(fields)
    if isinstance(fields, FieldStack) and scaler.support_.all():
        return fields.with_data(Z), scaler
    return Z, scaler


class PCAReducer(TransformerMixin, BaseEstimator):
    """Principal components retaining a fraction of total variance.

    The number of components is the smallest ``K`` whose cumulative
    explained-variance ratio reaches ``variance_threshold``. Loadings are
    sign-normalised so that the largest-magnitude entry of each is positive.

    Parameters
    ----------
    variance_threshold : float, default=0.95
        Target cumulative explained-variance ratio in ``(0, 1]``.

    Attributes
    ----------
    mean_ : ndarray of shape (D,)
    loadings_ : ndarray of shape (D, K)
        Orthonormal columns.
    explained_variance_ratio_ : ndarray of shape (K,)
    all_loadings_ : ndarray of shape (D, R)
        Every component with nonzero variance (``R`` = numerical rank).
    """

    def __init__(self, variance_threshold=0.95):
        self.variance_threshold = variance_threshold

    def fit(self, X, y=None):
        if not 0 < self.variance_threshold <= 1:
            raise DomainError("variance_threshold must lie in (0, 1]")
        X = _as_matrix(X)
        if X.shape[0] < 2:
            raise DomainError("PCA needs at least two rows")
        self.mean_ = X.mean(axis=0)
        Xc = X - self.mean_
        _, s, vt = np.linalg.svd(Xc, full_matrices=False)
        var = s**2
        total = var.sum()
        if total <= 0:
            raise DomainError("data has zero variance")
        rank = int(np.sum(s > s[0] * max(X.shape) * np.finfo(float).eps))
        vt = vt[:rank]
        flip = np.sign(vt[np.arange(rank), np.abs(vt).argmax(axis=1)])
        vt *= flip[:, None]
        ratio = var[:rank] / total
        cumulative = np.cumsum(ratio)
        k = int(np.searchsorted(cumulative, self.variance_threshold - 1e-12) + 1)
        k = min(k, rank)
        self.all_loadings_ = vt.T
        self.all_explained_variance_ratio_ = ratio
        self.loadings_ = vt[:k].T
        self.explained_variance_ratio_ = ratio[:k]
        self.n_components_ = k
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "loadings_")
        X = _as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return (X - self.mean_) @ self.loadings_

    def inverse_transform(self, scores):
        return np.asarray(scores) @ self.loadings_.T + self.mean_


def pca_fit(fields, variance_threshold=0.95) -> PCAReducer:
    return PCAReducer(variance_threshold).fit(fields)


def pca_project(model: PCAReducer, fields) -> np.ndarray:
    return model.transform(fields)
