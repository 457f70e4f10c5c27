"""Least-squares estimation of coefficient matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import DesignSet

# condition number of X'X above which the ridge path is taken
MAX_CONDITION = 1e12
RIDGE_FACTOR = 1e-8


@dataclass(frozen=True)
class OLSInfo:
    n_rows: int
    n_features: int
    residual_rms: float
    regularized: bool
    ridge_lambda: float = 0.0


def ols_solve(X, Y) -> tuple[np.ndarray, OLSInfo]:
    """Solve the normal equations, returning ``B`` with ``Y ~ X @ B.T``.

    Falls back to ridge with ``lambda = 1e-8 * trace(X'X) / cols`` when
    ``X'X`` is singular or ill-conditioned (including rows < cols).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, k = X.shape
    XtX = X.T @ X
    XtY = X.T @ Y
    regularized = n < k or not np.isfinite(cond := np.linalg.cond(XtX)) or cond > MAX_CONDITION
    lam = 0.0
    if not regularized:
        try:
            B = np.linalg.solve(XtX, XtY).T
        except np.linalg.LinAlgError:
            regularized = True
    if regularized:
        lam = RIDGE_FACTOR * np.trace(XtX) / max(k, 1)
        if lam == 0.0:
            lam = RIDGE_FACTOR
        B = np.linalg.solve(XtX + lam * np.eye(k), XtY).T
    resid = Y - X @ B.T
    rms = float(np.sqrt(np.mean(resid**2))) if resid.size else 0.0
    return B, OLSInfo(n, k, rms, bool(regularized), float(lam))


def ols_fit(design: DesignSet, return_info: bool = False):
    """Coefficient matrix ``B`` (targets x features) for a design set."""
    B, info = ols_solve(design.X, design.Y)
    return (B, info) if return_info else B
