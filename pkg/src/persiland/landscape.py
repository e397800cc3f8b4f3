"""Persistence landscapes sampled on a uniform grid, with exact gradients.

Each pair ``(b, d)`` contributes the tent function

    f(x) = x - d   for d < x <= (d + b) / 2
    f(x) = b - x   for (d + b) / 2 < x < b
    f(x) = 0       otherwise

and the ``k``-th landscape function is the pointwise ``k``-th largest tent.
Every sampled entry is either zero or one of the two linear pieces above, so
its derivative with respect to the signal is ``-1`` at the death vertex
(rising piece) or ``+1`` at the birth vertex (falling piece). The sampled
matrix records that route per entry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidInputError
from .topology import BirthDeathPair, PersistenceDiagram, compute_pairs

__all__ = [
    "BIRTH",
    "DEATH",
    "LandscapeSpec",
    "LandscapeMatrix",
    "PersistenceLandscape",
    "Route",
    "landscape_backward",
    "landscape_value",
    "sample_landscape",
    "triangle_eval",
]

BIRTH = 1
DEATH = -1
_NONE = 0


class Route(NamedTuple):
    """Where the gradient of one landscape entry flows."""

    pair_id: int
    side: str  # "birth" or "death"
    sign: int


@dataclass(frozen=True)
class LandscapeSpec:
    """Sampling window ``[c0, c1]`` with ``num_pieces`` rows and ``num_samples`` columns."""

    c0: float = 0.0
    c1: float = 5.0
    num_pieces: int = 5
    num_samples: int = 10

    def __post_init__(self):
        errors = []
        if not (np.isfinite(self.c0) and np.isfinite(self.c1)) or not self.c1 > self.c0:
            errors.append(f"c1 must exceed c0 (got c0={self.c0}, c1={self.c1})")
        if int(self.num_pieces) != self.num_pieces or self.num_pieces < 1:
            errors.append(f"num_pieces must be a positive integer (got {self.num_pieces})")
        if int(self.num_samples) != self.num_samples or self.num_samples < 1:
            errors.append(f"num_samples must be a positive integer (got {self.num_samples})")
        if errors:
            raise InvalidInputError("; ".join(errors))

    @property
    def grid(self) -> np.ndarray:
        if self.num_samples == 1:
            return np.array([(self.c0 + self.c1) / 2.0])
        return np.linspace(self.c0, self.c1, self.num_samples)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_pieces, self.num_samples)


@dataclass
class LandscapeMatrix:
    """Sampled landscape with per-entry gradient routes.

    ``pair_ids[k, q]`` is the pair supplying entry ``(k, q)`` or ``-1``;
    ``sides`` holds ``BIRTH``, ``DEATH`` or ``0``; ``source_index`` is the
    signal position whose value the entry depends on, or ``-1``.
    """

    values: np.ndarray
    pair_ids: np.ndarray
    sides: np.ndarray
    source_index: np.ndarray
    signal_length: int

    @property
    def signs(self) -> np.ndarray:
        # d/db = +1 on the falling piece, d/dd = -1 on the rising piece
        return self.sides.astype(np.float64)

    def route(self, k: int, q: int) -> Route | None:
        side = int(self.sides[k, q])
        if side == _NONE:
            return None
        return Route(int(self.pair_ids[k, q]), "birth" if side == BIRTH else "death", side)


def triangle_eval(pair: BirthDeathPair, x: float) -> tuple[float, tuple[str, int] | None]:
    """Value of one tent at ``x`` and the endpoint it depends on."""
    b, d = pair.birth, pair.death
    mid = (d + b) / 2.0
    if d < x <= mid:
        return x - d, ("death", DEATH)
    if mid < x < b:
        return b - x, ("birth", BIRTH)
    return 0.0, None


def _tents(births: np.ndarray, deaths: np.ndarray, grid: np.ndarray):
    """Tent values and sides, shape ``(n_pairs, n_grid)``."""
    b = births[:, None]
    d = deaths[:, None]
    mid = (d + b) / 2.0
    rising = (grid > d) & (grid <= mid)
    falling = (grid > mid) & (grid < b)
    vals = np.where(rising, grid - d, np.where(falling, b - grid, 0.0))
    sides = np.where(rising, DEATH, np.where(falling, BIRTH, _NONE)).astype(np.int8)
    return vals, sides


def landscape_value(diagram: PersistenceDiagram, k: int, x: float) -> tuple[float, Route | None]:
    """``k``-th largest tent value at ``x`` (``k`` is 1-based)."""
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if len(diagram) < k:
        return 0.0, None
    vals, sides = _tents(diagram.births, diagram.deaths, np.array([float(x)]))
    order = np.argsort(-vals[:, 0], kind="stable")
    pid = int(order[k - 1])
    value = float(vals[pid, 0])
    if value <= 0.0:
        return 0.0, None
    side = int(sides[pid, 0])
    return value, Route(pid, "birth" if side == BIRTH else "death", side)


def sample_landscape(diagram: PersistenceDiagram, spec: LandscapeSpec) -> LandscapeMatrix:
    """Sample the first ``spec.num_pieces`` landscape functions on ``spec.grid``.

    Ties between equal tent values route to the smallest pair id.
    """
    P, Q = spec.shape
    values = np.zeros((P, Q))
    pair_ids = np.full((P, Q), -1, dtype=np.intp)
    sides = np.zeros((P, Q), dtype=np.int8)
    source = np.full((P, Q), -1, dtype=np.intp)
    n = len(diagram)
    if n:
        vals, tent_sides = _tents(diagram.births, diagram.deaths, spec.grid)
        order = np.argsort(-vals, axis=0, kind="stable")[:P]
        rows = order.shape[0]
        cols = np.arange(Q)
        top = vals[order, cols]
        live = top > 0.0
        values[:rows] = np.where(live, top, 0.0)
        pair_ids[:rows] = np.where(live, order, -1)
        s = np.where(live, tent_sides[order, cols], _NONE)
        sides[:rows] = s
        src = np.where(
            s == BIRTH,
            diagram.birth_indices[order],
            np.where(s == DEATH, diagram.death_indices[order], -1),
        )
        source[:rows] = src
    return LandscapeMatrix(values, pair_ids, sides, source, diagram.signal_length)


def landscape_backward(matrix: LandscapeMatrix, upstream, signal_length: int | None = None) -> np.ndarray:
    """Scatter ``upstream`` (shape ``(P, Q)``) back onto the signal.

    Returns
    -------
    ndarray of shape (signal_length,)
        ``grad[i] = sum of sign * upstream[k, q]`` over entries routed to ``i``.
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != matrix.values.shape:
        raise InvalidInputError(
            f"upstream shape {upstream.shape} does not match landscape shape {matrix.values.shape}"
        )
    n = matrix.signal_length if signal_length is None else int(signal_length)
    grad = np.zeros(n)
    mask = matrix.sides != _NONE
    np.add.at(grad, matrix.source_index[mask], matrix.signs[mask] * upstream[mask])
    return grad


class PersistenceLandscape(TransformerMixin, BaseEstimator):
    """Map 1-D signals to flattened sampled persistence landscapes.

    Parameters
    ----------
    c0, c1 : float, default=(0.0, 5.0)
        Sampling window.
    num_pieces : int, default=5
        Number of landscape functions kept.
    num_samples : int, default=10
        Grid points per landscape function.

    Examples
    --------
    >>> PersistenceLandscape(c0=0, c1=2, num_pieces=2, num_samples=5).fit_transform([[0, 2, 0, 1, 0]])
    array([[0. , 0.5, 1. , 0.5, 0. , 0. , 0.5, 0. , 0. , 0. ]])
    """

    def __init__(self, c0=0.0, c1=5.0, num_pieces=5, num_samples=10):
        self.c0 = c0
        self.c1 = c1
        self.num_pieces = num_pieces
        self.num_samples = num_samples

    def fit(self, X, y=None):
        self.spec_ = LandscapeSpec(float(self.c0), float(self.c1), int(self.num_pieces), int(self.num_samples))
        self.n_features_out_ = self.spec_.num_pieces * self.spec_.num_samples
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        if isinstance(X, np.ndarray) and X.ndim == 1:
            raise InvalidInputError("expected a 2-D array or a list of signals, got a single 1-D array")
        out = np.empty((len(X), self.n_features_out_))
        for i, signal in enumerate(X):
            out[i] = sample_landscape(compute_pairs(signal), self.spec_).values.ravel()
        return out
