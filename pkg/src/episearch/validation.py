"""Input validation helpers used across estimator and transform code."""

from __future__ import annotations

import numpy as np

from .errors import AlignmentError, ValidationError


def as_float_array(x, name="array", ndim=None):
    """Coerce to a float64 ndarray, requiring finite entries."""
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def series_values(s, name="series"):
    """Extract the value array from a TimeSeries-like object or array."""
    values = getattr(s, "values", s)
    return as_float_array(values, name=name, ndim=1)


def check_matrix_target(X, y):
    """Validate a (rows x features) design against its target vector."""
    X = as_float_array(X, name="X", ndim=2)
    y = as_float_array(y, name="y", ndim=1)
    if X.shape[0] != y.shape[0]:
        raise AlignmentError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    return X, y


def check_same_span(a, b, what="series"):
    """Require two TimeSeries to cover identical dates."""
    if a.start_date != b.start_date or len(a) != len(b):
        raise AlignmentError(
            f"{what} spans differ: {a.start_date}+{len(a)}d vs {b.start_date}+{len(b)}d"
        )


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be positive and finite, got {value!r}")
    return float(value)


def check_unit_interval(values, name):
    arr = as_float_array(values, name=name)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValidationError(f"{name} must lie in [0, 1]")
    return arr
