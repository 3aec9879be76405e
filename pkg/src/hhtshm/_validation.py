"""Input checks shared by the estimator classes."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from hhtshm.timeseries import TimeSeries


def check_matrix(X, min_samples: int = 1, n_features: int | None = None) -> np.ndarray:
    """Finite 2-D float array with at least ``min_samples`` rows."""
    X = check_array(X, dtype=float, ensure_min_samples=min_samples)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, expected {n_features}")
    return X


def check_targets(y, n_samples: int) -> tuple[np.ndarray, bool]:
    """Targets as a 2-D array plus a flag telling whether ``y`` was 1-D."""
    y = np.asarray(y, dtype=float)
    one_d = y.ndim == 1
    Y = check_array(y.reshape(-1, 1) if one_d else y, dtype=float)
    if Y.shape[0] != n_samples:
        raise ValueError(f"y has {Y.shape[0]} rows, X has {n_samples}")
    return Y, one_d


def as_series(x, dt: float | None = None) -> TimeSeries:
    """Accept a TimeSeries or a 1-D array plus ``dt``."""
    if isinstance(x, TimeSeries):
        return x
    if dt is None:
        raise ValueError("dt is required when passing a plain array")
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError("expected a 1-D signal")
    if not np.all(np.isfinite(arr)):
        raise ValueError("signal contains non-finite values")
    return TimeSeries(arr, dt)


def as_story_matrix(X) -> np.ndarray:
    """``(n_samples, n_stories)`` finite float array."""
    return check_array(X, dtype=float, ensure_min_samples=2)
