"""Input validation helpers shared by the estimators and the monitor."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

__all__ = ["check_array", "check_feature_matrix", "check_positive", "check_fraction"]


def check_array(X, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array with finite entries."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValidationError(
            f"{name} contains a non-finite value at row {bad[0]}, column {bad[1]}"
        )
    return arr


def check_feature_matrix(X, n_features: int, name: str = "X") -> np.ndarray:
    arr = check_array(X, name)
    if arr.shape[1] != n_features:
        raise ValidationError(
            f"{name} has {arr.shape[1]} columns, expected {n_features}"
        )
    return arr


def check_positive(value, name: str):
    if not value > 0:
        raise ValidationError(f"{name} must be positive, got {value}")
    return value


def check_fraction(value, name: str):
    if not 0.0 < value < 1.0:
        raise ValidationError(f"{name} must be strictly between 0 and 1, got {value}")
    return value
