"""Self-organising map on a hexagonal lattice."""

from __future__ import annotations

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import DomainError


def hex_coordinates(n_rows: int, n_cols: int) -> np.ndarray:
    """Planar positions of lattice nodes; odd rows are shifted half a cell.

    Node ``r * n_cols + c`` sits at ``(c + 0.5 * (r % 2), r * sqrt(3) / 2)`` so
    every interior node has six neighbours at unit distance.
    """
    r, c = np.divmod(np.arange(n_rows * n_cols), n_cols)
    return np.column_stack([c + 0.5 * (r % 2), r * np.sqrt(3.0) / 2.0])


def bmu_indices(weights: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Best matching unit of each row of ``X`` (lowest index wins ties)."""
    out = np.empty(X.shape[0], dtype=np.int64)
    for lo in range(0, X.shape[0], 8192):
        chunk = X[lo:lo + 8192]
        d2 = ((chunk[:, None, :] - weights[None, :, :]) ** 2).sum(axis=2)
        out[lo:lo + 8192] = d2.argmin(axis=1)
    return out


def quantization_error(weights: np.ndarray, X: np.ndarray) -> float:
    """Mean Euclidean distance from each input to its best matching unit."""
    total = 0.0
    for lo in range(0, X.shape[0], 8192):
        chunk = X[lo:lo + 8192]
        d2 = ((chunk[:, None, :] - weights[None, :, :]) ** 2).sum(axis=2)
        total += np.sqrt(d2.min(axis=1)).sum()
    return total / X.shape[0]


@njit(cache=True)
def _train_epoch(weights, X, order, lattice_d2, sigmas, rates):
    n_nodes, dim = weights.shape
    for step in range(order.shape[0]):
        x = X[order[step]]
        best, best_d = 0, np.inf
        for j in range(n_nodes):
            d = 0.0
            for k in range(dim):
                diff = x[k] - weights[j, k]
                d += diff * diff
            if d < best_d:
                best_d = d
                best = j
        sigma = sigmas[step]
        lr = rates[step]
        for j in range(n_nodes):
            if sigma > 0.0:
                h = np.exp(-lattice_d2[best, j] / (2.0 * sigma * sigma))
            elif j == best:
                h = 1.0
            else:
                h = 0.0
            g = lr * h
            if g == 0.0:
                continue
            for k in range(dim):
                weights[j, k] += g * (x[k] - weights[j, k])


class SelfOrganizingMap(BaseEstimator):
    """Online Kohonen map with a Gaussian neighbourhood on a hex lattice.

    Each epoch presents every input once in a seeded random order. Both the
    neighbourhood width and the learning rate decay linearly over the total
    number of presentations. Weights start at a random sample of inputs.

    Parameters
    ----------
    n_rows, n_cols : int, default=3, 7
        Lattice shape.
    n_epochs : int, default=10
    sigma_start : float or None, default=None
        Initial neighbourhood width; ``None`` means ``max(n_rows, n_cols) / 2``.
    sigma_end : float, default=0.5
    learning_rate_start : float, default=0.5
    learning_rate_end : float, default=0.01
    random_state : int, default=0

    Attributes
    ----------
    weights_ : ndarray of shape (n_rows * n_cols, K)
    coordinates_ : ndarray of shape (n_rows * n_cols, 2)
    quantization_errors_ : list of float
        Quantisation error at initialisation followed by one value per epoch.
    """

    def __init__(
        self,
        n_rows=3,
        n_cols=7,
        n_epochs=10,
        sigma_start=None,
        sigma_end=0.5,
        learning_rate_start=0.5,
        learning_rate_end=0.01,
        random_state=0,
    ):
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.n_epochs = n_epochs
        self.sigma_start = sigma_start
        self.sigma_end = sigma_end
        self.learning_rate_start = learning_rate_start
        self.learning_rate_end = learning_rate_end
        self.random_state = random_state

    @property
    def n_nodes(self) -> int:
        return self.n_rows * self.n_cols

    def fit(self, X, y=None):
        if self.n_rows < 1 or self.n_cols < 1:
            raise DomainError("lattice must have at least one node")
        if self.n_epochs < 1:
            raise DomainError("n_epochs must be >= 1")
        X = check_array(X, dtype=np.float64)
        T = X.shape[0]
        if T < self.n_nodes:
            raise DomainError(f"{T} inputs cannot initialise {self.n_nodes} nodes")
        rng = np.random.default_rng(self.random_state)
        weights = X[np.sort(rng.choice(T, size=self.n_nodes, replace=False))].copy()
        coords = hex_coordinates(self.n_rows, self.n_cols)
        lattice_d2 = ((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2)

        sigma0 = max(self.n_rows, self.n_cols) / 2.0 if self.sigma_start is None else self.sigma_start
        total = T * self.n_epochs
        frac = np.arange(total) / max(total - 1, 1)
        sigmas = sigma0 + (self.sigma_end - sigma0) * frac
        rates = self.learning_rate_start + (self.learning_rate_end - self.learning_rate_start) * frac

        errors = [quantization_error(weights, X)]
        for epoch in range(self.n_epochs):
            order = rng.permutation(T)
            window = slice(epoch * T, (epoch + 1) * T)
            _train_epoch(weights, X, order, lattice_d2, sigmas[window], rates[window])
            errors.append(quantization_error(weights, X))

        self.weights_ = weights
        self.coordinates_ = coords
        self.quantization_errors_ = errors
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Best matching unit index for each row."""
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.weights_.shape[1]:
            raise DomainError(f"expected {self.weights_.shape[1]} columns, got {X.shape[1]}")
        return bmu_indices(self.weights_, X)


def som_train(scores, n_rows=3, n_cols=7, random_state=0, **schedule) -> SelfOrganizingMap:
    return SelfOrganizingMap(n_rows, n_cols, random_state=random_state, **schedule).fit(scores)


def som_bmu(model: SelfOrganizingMap, x) -> int:
    """Index of the node nearest to a single score vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DomainError("som_bmu expects a single score vector")
    return int(model.predict(x[None, :])[0])
