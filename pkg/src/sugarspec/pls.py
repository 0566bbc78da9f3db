"""NIPALS PLS1 regression, component selection and segmented PLS."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dataset import FoldSplit, kfold_split

DEFAULT_MAX_COMPONENTS = 15
DEFAULT_INNER_FOLDS = 5


class PlsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PlsModel:
    """Fitted PLS1 state.

    ``W`` holds the unit-norm NIPALS weights of the successively deflated X,
    ``P`` the X loadings and ``q`` the y loadings. ``B`` and ``intercept``
    collapse the latent recursion into a single linear predictor.
    """

    n_components: int
    requested: int
    x_mean: np.ndarray
    y_mean: float
    W: np.ndarray
    P: np.ndarray
    q: np.ndarray
    B: np.ndarray
    intercept: float

    @property
    def rotations(self) -> np.ndarray:
        """R = W (P^T W)^-1; column a maps centred X straight to score a."""
        if self.n_components == 0:
            return np.zeros((self.x_mean.size, 0))
        return self.W @ np.linalg.inv(self.P.T @ self.W)

    def coefficients(self, n_components: int) -> np.ndarray:
        """Regression vector using only the first ``n_components`` latent variables."""
        a = min(n_components, self.n_components)
        return self.rotations[:, :a] @ self.q[:a]


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise PlsError("X must be 2-D")
    if X.shape[0] != y.size:
        raise PlsError(f"X has {X.shape[0]} rows but y has {y.size} values")
    return X, y


def pls_fit(X, y, n_components: int) -> PlsModel:
    X, y = _check_xy(X, y)
    n, d = X.shape
    if n < 2:
        raise PlsError("PLS needs at least 2 samples")
    if not 1 <= n_components <= min(n - 1, d):
        raise PlsError(f"n_components={n_components} outside [1, {min(n - 1, d)}]")
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    W, P, q, achieved = _kernels.nipals_pls1(
        np.ascontiguousarray(X - x_mean), y - y_mean, n_components, _kernels.DEGENERATE_TOL
    )
    W, P, q = W[:, :achieved].copy(), P[:, :achieved].copy(), q[:achieved].copy()
    if achieved:
        B = W @ np.linalg.solve(P.T @ W, q)
    else:
        B = np.zeros(d)
    return PlsModel(achieved, n_components, x_mean, y_mean, W, P, q, B, y_mean - float(x_mean @ B))


def pls_predict(model: PlsModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    vec = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.x_mean.size:
        raise PlsError(f"expected {model.x_mean.size} columns, got {X.shape[1]}")
    out = (X - model.x_mean) @ model.B + model.y_mean
    return out[0] if vec else out


def pls_predict_recursive(model: PlsModel, X) -> np.ndarray:
    """Prediction through the latent variables one at a time (with deflation)."""
    Xc = np.atleast_2d(np.asarray(X, dtype=float)) - model.x_mean
    yhat = np.full(Xc.shape[0], model.y_mean)
    for a in range(model.n_components):
        t = Xc @ model.W[:, a]
        yhat += t * model.q[a]
        Xc = Xc - np.outer(t, model.P[:, a])
    return yhat


def pls_cv_predictions(X, y, folds: FoldSplit, max_components: int) -> np.ndarray:
    """Out-of-fold predictions for every A in 1..max_components, shape (max_A, n).

    Each fold is fitted once with the largest feasible A; smaller A reuse
    the leading columns of the rotation matrix.
    """
    X, y = _check_xy(X, y)
    out = np.empty((max_components, y.size))
    for train, val in folds:
        a_max = min(max_components, train.size - 1, X.shape[1])
        model = pls_fit(X[train], y[train], a_max)
        R = model.rotations
        scores = (X[val] - model.x_mean) @ R
        partial = np.cumsum(scores * model.q, axis=1)
        for a in range(max_components):
            col = min(a, model.n_components - 1)
            out[a, val] = model.y_mean + (partial[:, col] if col >= 0 else 0.0)
    return out


def pls_cv_curve(X, y, folds: FoldSplit, max_components: int) -> np.ndarray:
    """Pooled RMSECV for A = 1..max_components."""
    X, y = _check_xy(X, y)
    preds = pls_cv_predictions(X, y, folds, max_components)
    return np.sqrt(np.mean((preds - y) ** 2, axis=1))


def argmin_first(values, rtol: float = 1e-12) -> int:
    """Index of the minimum; values within ``rtol`` of it count as ties (first wins)."""
    v = np.asarray(values, dtype=float)
    best = float(np.min(v))
    return int(np.flatnonzero(v <= best + rtol * abs(best))[0])


def max_feasible_components(n_train: int, d: int, k_inner: int, cap: int) -> int:
    inner_train = n_train - math.ceil(n_train / k_inner)
    return max(1, min(cap, inner_train - 1, d))


def select_components(X, y, k_inner: int = DEFAULT_INNER_FOLDS,
                      max_A: int = DEFAULT_MAX_COMPONENTS, seed: int = 0) -> int:
    """A in 1..max_A with the smallest inner-CV RMSECV; ties go to the smaller A."""
    X, y = _check_xy(X, y)
    folds = kfold_split(y.size, k_inner, seed)
    curve = pls_cv_curve(X, y, folds, max_A)
    return argmin_first(curve) + 1


def fit_pls_auto(X, y, *, k_inner=DEFAULT_INNER_FOLDS, max_A=DEFAULT_MAX_COMPONENTS,
                 seed=0, n_components=None) -> PlsModel:
    """Fit PLS with an inner-CV component count (or a fixed one)."""
    X, y = _check_xy(X, y)
    if n_components is None:
        cap = max_feasible_components(y.size, X.shape[1], k_inner, max_A)
        n_components = select_components(X, y, k_inner, cap, seed)
    return pls_fit(X, y, min(n_components, y.size - 1, X.shape[1]))


def segment_bounds(d: int, segment_len: int) -> list[tuple[int, int]]:
    if not 1 <= segment_len <= d:
        raise PlsError(f"segment length {segment_len} outside [1, {d}]")
    return [(lo, min(lo + segment_len, d)) for lo in range(0, d, segment_len)]


def segmented_pls(X, y, segment_len: int, k: int = 10, seed: int = 0, *,
                  max_A: int = DEFAULT_MAX_COMPONENTS, k_inner: int = DEFAULT_INNER_FOLDS):
    """Cross-validate plain PLS on each contiguous column segment.

    Returns (index of the best segment, list of per-segment RMSECV).
    """
    from .validation import cv_pls_rmsecv

    X, y = _check_xy(X, y)
    folds = kfold_split(y.size, k, seed)
    scores = []
    for lo, hi in segment_bounds(X.shape[1], segment_len):
        scores.append(cv_pls_rmsecv(X[:, lo:hi], y, folds, seed=seed, max_A=max_A, k_inner=k_inner))
    return argmin_first(scores), scores
