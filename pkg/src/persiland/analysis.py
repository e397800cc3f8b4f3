"""Post-hoc inspection of trained networks: landscape/activity correlation and branch weights."""

from __future__ import annotations

import numpy as np

from .data import Dataset
from .exceptions import InvalidInputError, UndefinedMetricError
from .metrics import pearson
from .network.model import Network

__all__ = [
    "activity_surrogate",
    "branch_weight_summary",
    "clip_landscape_means",
    "landscape_activity_correlation",
    "tag_landscape_ranking",
]


def activity_surrogate(features) -> float:
    """Mean positive frame-to-frame increase of the channel-summed features."""
    s = np.asarray(features, dtype=np.float64).sum(axis=0)
    if s.size < 2:
        return 0.0
    return float(np.maximum(np.diff(s), 0.0).mean())


def clip_landscape_means(network: Network, features) -> np.ndarray:
    """Average persistence-layer output per landscape piece, shape ``(P,)``.

    The average runs over grid points, segments and early-convolution filters.
    """
    spec = network.spec
    if not spec.uses_persistence:
        raise InvalidInputError("network has no persistence branch")
    x = np.asarray(features, dtype=np.float64)
    spec.output_lengths(x.shape[1])
    _, _, pers, _ = network.forward_mid(x[np.newaxis])
    P, Q = spec.persistence.landscape.shape
    U = spec.early_channels
    return pers[0].reshape(U, P, Q, -1).mean(axis=(0, 2, 3))


def landscape_activity_correlation(network: Network, dataset: Dataset, transform=None) -> dict:
    """Pearson correlation between clip activity and each landscape piece's mean value.

    Activity is the clip's true peak count when every clip carries one
    (synthetic data), otherwise :func:`activity_surrogate` of the raw
    features. ``transform`` maps raw features to network input, e.g. a
    fitted normaliser.

    Returns
    -------
    dict
        ``coefficients`` (one float per piece, ``None`` where undefined),
        ``undefined`` (1-based pieces without a coefficient), ``activity``,
        ``landscape_means`` and ``activity_source``.
    """
    clips = dataset.clips
    if len(clips) < 2:
        raise InvalidInputError("need at least two clips to correlate")
    if all(c.peak_count is not None for c in clips):
        activity = np.array([c.peak_count for c in clips], dtype=np.float64)
        source = "peak_count"
    else:
        activity = np.array([activity_surrogate(c.features) for c in clips])
        source = "mean_positive_difference"
    means = np.stack(
        [clip_landscape_means(network, transform(c.features) if transform else c.features) for c in clips]
    )
    coefficients: list[float | None] = []
    undefined = []
    for k in range(means.shape[1]):
        try:
            coefficients.append(pearson(activity, means[:, k]))
        except UndefinedMetricError:
            coefficients.append(None)
            undefined.append(k + 1)
    return {
        "coefficients": coefficients,
        "undefined": undefined,
        "activity": activity,
        "landscape_means": means,
        "activity_source": source,
    }


def tag_landscape_ranking(landscape_means: np.ndarray, dataset: Dataset, piece: int) -> list[tuple[str, float]]:
    """Tags ordered by the mean value of landscape piece ``piece`` (1-based) over their clips."""
    Y = dataset.Y
    rows = []
    for j, tag in enumerate(dataset.tag_names):
        on = Y[:, j] == 1
        if on.any():
            rows.append((tag, float(landscape_means[on, piece - 1].mean())))
    return sorted(rows, key=lambda r: -r[1])


def branch_weight_summary(network: Network) -> np.ndarray:
    """Mean absolute weight from each landscape piece into the first late layer.

    Returns
    -------
    ndarray of shape (P,)
    """
    spec = network.spec
    if not spec.uses_persistence:
        raise InvalidInputError("network has no persistence branch")
    W = network.params["late0.weight"][:, :, 0]
    pers = W[:, spec.conv_channels :]
    P, Q = spec.persistence.landscape.shape
    blocks = pers.reshape(W.shape[0], spec.early_channels, P, Q)
    return np.abs(blocks).mean(axis=(0, 1, 3))
