"""Input validation helpers shared by the estimators."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array


def as_vec2(v, name="vector"):
    """Return ``v`` as a finite float array of shape (2,)."""
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (2,):
        raise ValueError(f"{name} must have two components, got shape {np.shape(v)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr


def check_finite_scalar(x, name):
    if not isinstance(x, numbers.Real) or not np.isfinite(x):
        raise ValueError(f"{name} must be a finite real number, got {x!r}")
    return float(x)


def check_positive(x, name):
    x = check_finite_scalar(x, name)
    if x <= 0:
        raise ValueError(f"{name} must be > 0, got {x}")
    return x


def check_nonnegative(x, name):
    x = check_finite_scalar(x, name)
    if x < 0:
        raise ValueError(f"{name} must be >= 0, got {x}")
    return x


def check_channels(X, n_channels=3, name="X", min_samples=1):
    """Validate a (n_samples, n_channels) float array with no NaN/Inf."""
    X = check_array(
        X,
        dtype=np.float64,
        ensure_2d=True,
        ensure_min_samples=min_samples,
        input_name=name,
    )
    if X.shape[1] != n_channels:
        raise ValueError(f"{name} must have {n_channels} columns, got {X.shape[1]}")
    return X


def check_same_length(*arrays):
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise ValueError(f"inputs have inconsistent lengths: {sorted(lengths)}")
    return lengths.pop()
