"""Input checks shared by the estimator classes."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DomainError


def check_logz(X, columns=2):
    """Validate an ``(N, columns)`` array of final log populations."""
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] != columns:
        raise DomainError(f"expected {columns} columns (ln Z1, ln Z2), got {X.shape[1]}")
    if np.any(X < 0):
        raise DomainError("log populations must be >= 0")
    return X


def check_indices(X):
    """Replication indices as a flat int64 array."""
    X = np.asarray(X)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    if X.ndim != 1:
        raise DomainError(f"expected a 1-d array of replication indices, got shape {X.shape}")
    if X.size and (not np.issubdtype(X.dtype, np.integer) or X.min() < 0):
        raise DomainError("replication indices must be non-negative integers")
    return X.astype(np.int64)


def check_probability(value, name):
    value = float(value)
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value!r}")
    return value


def check_count(value, name):
    if int(value) != value or value < 1:
        raise DomainError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
