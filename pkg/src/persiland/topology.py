"""0-dimensional persistent homology of 1-D signals.

A signal of length ``N`` is the filtering function on the 1-D cubical complex
whose vertices are the sample positions and whose edges join neighbouring
samples. Components of the superlevel sets ``{i : f(i) >= v}`` are born at
local maxima and die when they merge into an older component as ``v``
decreases. The component of the global maximum never dies; it is assigned the
global minimum as its death so every pair is finite.

Conventions
-----------
* Runs of equal adjacent values enter the filtration together. A plateau
  maximum yields a single birth owned by the leftmost index of the run.
* Elder rule: at a merge the component with the larger birth survives; equal
  births are resolved in favour of the smaller birth index.
* Pairs with ``birth == death`` are kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ._validation import check_signal

__all__ = [
    "BirthDeathPair",
    "PersistenceDiagram",
    "compute_pairs",
    "brute_force_pairs",
    "count_local_maxima",
]


@dataclass(frozen=True)
class BirthDeathPair:
    """One connected component's lifetime under the superlevel filtration."""

    birth: float
    death: float
    birth_index: int
    death_index: int

    @property
    def persistence(self) -> float:
        return self.birth - self.death


class PersistenceDiagram:
    """Multiset of birth-death pairs of a single signal.

    Pairs are stored as parallel arrays, ordered by descending birth with
    ties broken by ascending birth index, so the essential pair always has
    ``pair_id == 0``.

    Attributes
    ----------
    births, deaths : ndarray of float64
    birth_indices, death_indices : ndarray of intp
    signal_length : int
    """

    __slots__ = ("births", "deaths", "birth_indices", "death_indices", "signal_length")

    def __init__(self, births, deaths, birth_indices, death_indices, signal_length: int):
        self.births = np.asarray(births, dtype=np.float64)
        self.deaths = np.asarray(deaths, dtype=np.float64)
        self.birth_indices = np.asarray(birth_indices, dtype=np.intp)
        self.death_indices = np.asarray(death_indices, dtype=np.intp)
        self.signal_length = int(signal_length)

    @classmethod
    def from_pairs(cls, pairs, signal_length: int) -> "PersistenceDiagram":
        pairs = sorted(pairs, key=lambda p: (-p.birth, p.birth_index))
        return cls(
            [p.birth for p in pairs],
            [p.death for p in pairs],
            [p.birth_index for p in pairs],
            [p.death_index for p in pairs],
            signal_length,
        )

    @classmethod
    def empty(cls, signal_length: int = 0) -> "PersistenceDiagram":
        return cls([], [], [], [], signal_length)

    def __len__(self) -> int:
        return len(self.births)

    def __iter__(self) -> Iterator[BirthDeathPair]:
        for b, d, bi, di in zip(self.births, self.deaths, self.birth_indices, self.death_indices):
            yield BirthDeathPair(float(b), float(d), int(bi), int(di))

    def __getitem__(self, pair_id: int) -> BirthDeathPair:
        return BirthDeathPair(
            float(self.births[pair_id]),
            float(self.deaths[pair_id]),
            int(self.birth_indices[pair_id]),
            int(self.death_indices[pair_id]),
        )

    @property
    def pairs(self) -> list[BirthDeathPair]:
        return list(self)

    @property
    def persistence(self) -> np.ndarray:
        return self.births - self.deaths

    def as_multiset(self) -> list[tuple[float, float]]:
        """Sorted ``(birth, death)`` tuples, for order-free comparison."""
        return sorted(zip(self.births.tolist(), self.deaths.tolist()))

    def __repr__(self) -> str:
        body = ", ".join(f"({b:g}, {d:g})" for b, d in zip(self.births, self.deaths))
        return f"PersistenceDiagram([{body}], signal_length={self.signal_length})"


def _run_starts(values: np.ndarray) -> np.ndarray:
    change = np.empty(len(values), dtype=bool)
    change[0] = True
    np.not_equal(values[1:], values[:-1], out=change[1:])
    return np.flatnonzero(change)


def compute_pairs(signal) -> PersistenceDiagram:
    """Birth-death pairs of ``signal`` under the superlevel filtration.

    Runs of equal values are collapsed first, then runs are inserted in
    descending order of value. In 1-D every component is an interval, so the
    union-find reduces to bookkeeping on interval endpoints.

    Parameters
    ----------
    signal : array-like of shape (N,)
        Finite values, ``N >= 1``.

    Returns
    -------
    PersistenceDiagram
        One pair per local-maximum plateau run.

    Raises
    ------
    InvalidInputError
        If the signal is empty or contains non-finite values.
    """
    values = check_signal(signal)
    starts = _run_starts(values)
    run_vals = values[starts]
    m = len(starts)
    # descending value, ascending position among equal values
    order = np.lexsort((np.arange(m), -run_vals)).tolist()
    rv = run_vals.tolist()
    st = starts.tolist()

    active = [False] * m
    other_end = [0] * m
    born = [0] * m  # birth run of the interval, stored at both endpoints
    births: list[int] = []
    deaths: list[int] = []

    for r in order:
        active[r] = True
        left = r > 0 and active[r - 1]
        right = r + 1 < m and active[r + 1]
        if not left and not right:
            other_end[r] = r
            born[r] = r
        elif left and not right:
            lo = other_end[r - 1]
            b = born[r - 1]
            other_end[lo], other_end[r] = r, lo
            born[r] = b
        elif right and not left:
            hi = other_end[r + 1]
            b = born[r + 1]
            other_end[hi], other_end[r] = r, hi
            born[r] = b
        else:
            lo = other_end[r - 1]
            hi = other_end[r + 1]
            bl = born[r - 1]
            br = born[r + 1]
            # bl lies left of br, so equal values resolve to bl
            if rv[br] > rv[bl]:
                elder, younger = br, bl
            else:
                elder, younger = bl, br
            births.append(younger)
            deaths.append(r)
            other_end[lo], other_end[hi] = hi, lo
            born[lo] = born[hi] = elder

    essential = order[0]
    births_idx = [st[b] for b in births]
    deaths_idx = [st[d] for d in deaths]
    births_idx.append(st[essential])
    deaths_idx.append(int(np.argmin(values)))

    bi = np.asarray(births_idx, dtype=np.intp)
    di = np.asarray(deaths_idx, dtype=np.intp)
    bv = values[bi]
    sort = np.lexsort((bi, -bv))
    return PersistenceDiagram(bv[sort], values[di][sort], bi[sort], di[sort], len(values))


def brute_force_pairs(signal) -> PersistenceDiagram:
    """Reference implementation by explicit threshold sweep.

    For every distinct value in descending order the superlevel set is
    materialised, its connected runs are labelled and matched against the
    components of the previous threshold. Quadratic in ``N``; intended as a
    test oracle for short signals.
    """
    values = check_signal(signal)
    n = len(values)
    # component label -> (birth value, birth index); label[i] = -1 if absent
    label = np.full(n, -1)
    comps: dict[int, tuple[float, int]] = {}
    next_label = 0
    pairs: list[BirthDeathPair] = []

    for v in np.unique(values)[::-1]:
        included = values >= v
        new_label = np.full(n, -1)
        i = 0
        while i < n:
            if not included[i]:
                i += 1
                continue
            j = i
            while j < n and included[j]:
                j += 1
            old = sorted({int(lab) for lab in label[i:j] if lab >= 0})
            if not old:
                # new component: all of its vertices sit exactly at v
                comps[next_label] = (float(v), i)
                new_label[i:j] = next_label
                next_label += 1
            else:
                ranked = sorted(old, key=lambda lab: (-comps[lab][0], comps[lab][1]))
                survivor = ranked[0]
                for dead in ranked[1:]:
                    b, b_idx = comps.pop(dead)
                    # first newly-added vertex separating the dead component
                    dead_pos = np.flatnonzero(label[i:j] == dead) + i
                    d_idx = _separating_vertex(label, values, v, i, j, dead_pos)
                    pairs.append(BirthDeathPair(b, float(v), b_idx, d_idx))
                new_label[i:j] = survivor
            i = j
        label = new_label

    (b, b_idx), = comps.values()
    pairs.append(BirthDeathPair(b, float(values.min()), b_idx, int(np.argmin(values))))
    return PersistenceDiagram.from_pairs(pairs, n)


def _separating_vertex(label, values, v, lo, hi, dead_pos) -> int:
    # nearest vertex at value v adjacent to the dead component's interval
    left, right = int(dead_pos[0]), int(dead_pos[-1])
    for cand in (left - 1, right + 1):
        if lo <= cand < hi and values[cand] == v and label[cand] < 0:
            return cand
    at_v = np.flatnonzero(values[lo:hi] == v) + lo
    return int(at_v[0])


def count_local_maxima(signal) -> int:
    """Number of local-maximum plateau runs.

    A run of equal values is a local maximum when every existing neighbour
    of the run is strictly lower. A constant signal counts as one maximum.
    """
    values = check_signal(signal)
    starts = _run_starts(values)
    rv = values[starts]
    m = len(rv)
    if m == 1:
        return 1
    higher_than_left = np.r_[True, rv[1:] > rv[:-1]]
    higher_than_right = np.r_[rv[:-1] > rv[1:], True]
    return int(np.count_nonzero(higher_than_left & higher_than_right))
