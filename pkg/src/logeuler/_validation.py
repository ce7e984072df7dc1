"""Small argument checkers shared by the public functions."""

import math

import numpy as np

from .exceptions import DomainError, InvalidFieldError


def check_positive(value, name):
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be positive, got {value}")
    return value


def check_open_interval(value, lo, hi, name, symbol=None):
    value = float(value)
    if not (lo < value < hi):
        raise DomainError(f"{symbol or name} must lie in ({lo:g},{hi:g})")
    return value


def check_grid_values(values):
    """Return ``values`` as a float64 square array or raise."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidFieldError(f"expected a square 2D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidFieldError("field contains non-finite values")
    return arr


def check_field_stack(X):
    """Validate a stack of fields shaped (n_fields, N, N) for the estimators."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise InvalidFieldError(
            f"expected an array of shape (n_fields, N, N), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidFieldError("field stack contains non-finite values")
    return arr
