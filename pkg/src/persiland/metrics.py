"""Multi-label ranking metrics: AUC, average precision and their per-class / per-clip means."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .exceptions import InvalidInputError, UndefinedMetricError

__all__ = ["EvalTable", "auc", "average_precision", "evaluate", "pearson"]


@dataclass
class EvalTable:
    """Scores and binary labels, both of shape ``(num_clips, num_tags)``."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.scores.ndim != 2 or self.scores.shape != self.labels.shape:
            raise InvalidInputError(
                f"scores {self.scores.shape} and labels {self.labels.shape} must be equal 2-D shapes"
            )
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise InvalidInputError("labels must be 0/1")
        self.labels = self.labels.astype(np.int8)


def _binary(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise InvalidInputError(f"scores and labels differ in length ({s.size} vs {y.size})")
    if not np.all((y == 0) | (y == 1)):
        raise InvalidInputError("labels must be 0/1")
    return s, y.astype(bool)


def auc(scores, labels) -> float:
    """Area under the ROC curve, with half credit for tied positive/negative pairs.

    Raises
    ------
    UndefinedMetricError
        If ``labels`` contain only one class.
    """
    s, y = _binary(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC is undefined when only one class is present")
    ranks = rankdata(s)  # mid-ranks give the 0.5 tie credit
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Mean of precision@rank over the positives, ranking by descending score.

    Equal scores keep their input order.
    """
    s, y = _binary(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("average precision is undefined without positives")
    order = np.argsort(-s, kind="stable")
    hits = y[order]
    ranks = np.flatnonzero(hits) + 1.0
    return float(np.mean(np.arange(1, n_pos + 1) / ranks))


def _mean_defined(metric, rows) -> tuple[float, list[float], int]:
    values = []
    undefined = 0
    for s, y in rows:
        try:
            values.append(metric(s, y))
        except UndefinedMetricError:
            values.append(float("nan"))
            undefined += 1
    defined = [v for v in values if not math.isnan(v)]
    mean = float(np.mean(defined)) if defined else float("nan")
    return mean, values, undefined


def evaluate(table, labels=None) -> dict:
    """Per-class and per-clip AUC and MAP.

    Accepts an :class:`EvalTable` or ``(scores, labels)``. Columns (tags) or
    rows (clips) on which a metric is undefined are left out of the mean and
    counted under ``undefined_*``.
    """
    if labels is not None:
        table = EvalTable(table, labels)
    S, Y = table.scores, table.labels
    cols = [(S[:, j], Y[:, j]) for j in range(S.shape[1])]
    rows = [(S[i], Y[i]) for i in range(S.shape[0])]
    pc_auc, tag_auc, u_pc_auc = _mean_defined(auc, cols)
    pc_map, tag_ap, u_pc_map = _mean_defined(average_precision, cols)
    pl_auc, _, u_pl_auc = _mean_defined(auc, rows)
    pl_map, _, u_pl_map = _mean_defined(average_precision, rows)
    return {
        "perclass_auc": pc_auc,
        "perclip_auc": pl_auc,
        "perclass_map": pc_map,
        "perclip_map": pl_map,
        "undefined_perclass_auc": u_pc_auc,
        "undefined_perclip_auc": u_pl_auc,
        "undefined_perclass_map": u_pc_map,
        "undefined_perclip_map": u_pl_map,
        "per_tag_auc": tag_auc,
        "per_tag_ap": tag_ap,
    }


def pearson(a, b) -> float:
    """Sample Pearson correlation of two equal-length sequences."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size or a.size < 2:
        raise InvalidInputError("pearson needs two sequences of equal length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    sa = np.sqrt(np.dot(da, da))
    sb = np.sqrt(np.dot(db, db))
    if sa == 0.0 or sb == 0.0:
        raise UndefinedMetricError("correlation is undefined for a zero-variance input")
    return float(np.clip(np.dot(da, db) / (sa * sb), -1.0, 1.0))
