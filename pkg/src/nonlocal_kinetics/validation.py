"""Input validation helpers built on scikit-learn's array checks."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .grid import GridSpec


def check_points(X) -> np.ndarray:
    """Evaluation points as a finite float array of shape ``(n_samples, 2)``."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected points with 2 coordinates, got {X.shape[1]}")
    return X


def check_field(X, grid: GridSpec) -> np.ndarray:
    """A single gridded field matching ``grid``."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape != grid.shape:
        raise ValueError(f"field shape {X.shape} does not match grid {grid.shape}")
    return X


def check_fields(X, grid: GridSpec) -> np.ndarray:
    """A stack of gridded fields, shape ``(n_fields,) + grid.shape``; a single field is promoted."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1:] != grid.shape:
        raise ValueError(f"fields must have shape (n, {grid.shape[0]}, {grid.shape[1]}), got {X.shape}")
    check_array(X.reshape(len(X), -1), dtype=np.float64)
    return X


def check_time(t) -> float:
    t = float(t)
    if not (np.isfinite(t) and t >= 0):
        raise ValueError(f"time must be finite and non-negative, got {t}")
    return t
