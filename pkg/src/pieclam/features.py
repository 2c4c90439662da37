"""Node feature preprocessing: dimensionality reduction or standardization."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.extmath import randomized_svd


def standardize_columns(x):
    """Zero-mean unit-std columns; constant columns map to all zeros."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    out = (x - mean) / safe
    out[:, std == 0] = 0.0
    return out


def reduce_features(x, target_dim=100, random_state=0):
    """Reduce feature dimension for use alongside affiliations.

    When D > target_dim, project onto the top right-singular subspace via
    randomized SVD (10 oversamples, 2 power iterations); otherwise return the
    standardized columns unchanged in dimension.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {x.shape}")
    if target_dim < 1:
        raise ValueError("target_dim must be >= 1")
    if x.shape[1] <= target_dim:
        return standardize_columns(x)
    u, s, _ = randomized_svd(
        x, n_components=target_dim, n_oversamples=10, n_iter=2,
        random_state=random_state,
    )
    return u * s


class FeatureReducer(BaseEstimator, TransformerMixin):
    """Transformer wrapper around reduce_features.

    Fitting on D > target_dim data learns the right-singular basis; transform
    projects onto it. At or below target_dim it learns per-column moments.
    """

    def __init__(self, target_dim=100, random_state=0):
        self.target_dim = target_dim
        self.random_state = random_state

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {X.shape}")
        if X.shape[1] > self.target_dim:
            _, _, vt = randomized_svd(
                X, n_components=self.target_dim, n_oversamples=10, n_iter=2,
                random_state=self.random_state,
            )
            self.components_ = vt
            self.mean_ = None
            self.scale_ = None
        else:
            self.components_ = None
            self.mean_ = X.mean(axis=0)
            std = X.std(axis=0)
            self.scale_ = np.where(std > 0, std, 1.0)
            self.zero_mask_ = std == 0
        return self

    def transform(self, X):
        if not hasattr(self, "components_"):
            raise ValueError("FeatureReducer is not fitted")
        X = np.asarray(X, dtype=np.float64)
        if self.components_ is not None:
            return X @ self.components_.T
        out = (X - self.mean_) / self.scale_
        out[:, self.zero_mask_] = 0.0
        return out
