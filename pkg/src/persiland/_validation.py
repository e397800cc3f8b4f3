"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidInputError


def check_signal(signal, *, name: str = "signal") -> np.ndarray:
    """Return ``signal`` as a finite, non-empty 1-D float64 array."""
    arr = np.asarray(signal, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidInputError("empty signal")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_feature_map(x, *, name: str = "feature map", dtype=np.float64) -> np.ndarray:
    """Return ``x`` as a finite ``(channels, time)`` array."""
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D (channels, time), got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name} must have at least one channel and one frame, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_multilabel(y, n_samples: int, n_tags: int | None = None) -> np.ndarray:
    """Validate a multi-hot label matrix of shape ``(n_samples, n_tags)``."""
    arr = np.asarray(y)
    if arr.ndim == 1:
        arr = arr[:, np.newaxis]
    if arr.ndim != 2 or arr.shape[0] != n_samples:
        raise InvalidInputError(
            f"labels must have shape ({n_samples}, n_tags), got {arr.shape}"
        )
    if n_tags is not None and arr.shape[1] != n_tags:
        raise InvalidInputError(f"labels have {arr.shape[1]} tags, expected {n_tags}")
    if not np.all((arr == 0) | (arr == 1)):
        raise InvalidInputError("labels must be multi-hot (0/1) vectors")
    return arr.astype(np.float64)
