# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Domain types shared by all heavy hitter mechanisms.

Universe elements are 0-based integers in ``[0, N)``.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, Optional, Sequence, Tuple

import numpy as np

# above this universe size histograms are stored as index -> count maps
DENSE_HISTOGRAM_MAX_UNIVERSE = 2**20

UniverseIndex = int


def check_index(index: int, universe_size: int) -> None:
    if universe_size < 2:
        raise ValueError(f"Universe size must be at least 2, got {universe_size}")
    if not 0 <= index < universe_size:
        raise ValueError(
            f"Universe element {index} is out of range [0, {universe_size})"
        )


class MechanismFailure(Exception):
    """A mechanism ran to completion but could not name a heavy hitter."""

    def __init__(self, mechanism: str, reason: str):
        self.mechanism = mechanism
        self.reason = reason

    def __str__(self) -> str:
        return f"Mechanism '{self.mechanism}' failed: {self.reason}."


class NoCandidateError(MechanismFailure):
    """Every trial (or repeat) of a mechanism returned no candidate."""


@dataclass(frozen=True)
class ClientRecord:
    """The single universe element held by one individual."""

    owner: int
    """index of the individual in ``[0, n)``"""
    element: UniverseIndex
    """universe element held by the individual"""


@dataclass(frozen=True)
class AccuracyParams:
    """Parameters of the (alpha, beta)-accuracy requirement."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not 0 < self.beta < 1:
            raise ValueError("beta must be in (0, 1)")

    def satisfied_by(self, deficit: int) -> bool:
        return deficit <= self.alpha


@dataclass
class HeavyHitterResult:
    """Outcome of a heavy hitter mechanism."""

    index: UniverseIndex
    """reported heavy hitter"""
    reported_count: float
    """count estimate of the reported element computed by the aggregator"""
    true_deficit: Optional[int] = None
    """``fhh(v) - v[index]``, only filled when the true histogram is known"""


class Histogram:
    """Aggregate count vector of a database.

    Counts are kept in a dense numpy array for universes up to
    :data:`DENSE_HISTOGRAM_MAX_UNIVERSE` elements and in a sparse mapping
    above; both layouts answer the same queries.
    """

    def __init__(self, universe_size: int, counts: Dict[int, int]):
        if universe_size < 2:
            raise ValueError(f"Universe size must be at least 2, got {universe_size}")
        self.universe_size = universe_size
        self._dense: Optional[np.ndarray] = None
        self._sparse: Dict[int, int] = {}
        if universe_size <= DENSE_HISTOGRAM_MAX_UNIVERSE:
            self._dense = np.zeros(universe_size, dtype=np.int64)
            for index, count in counts.items():
                self._dense[index] = count
        else:
            self._sparse = {i: c for i, c in counts.items() if c}
        self.n = int(sum(counts.values()))

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "Histogram":
        if any(c < 0 for c in counts):
            raise ValueError("Histogram counts must be non-negative")
        return cls(len(counts), {i: int(c) for i, c in enumerate(counts) if c})

    @property
    def is_dense(self) -> bool:
        return self._dense is not None

    def count(self, index: UniverseIndex) -> int:
        check_index(index, self.universe_size)
        if self._dense is not None:
            return int(self._dense[index])
        return self._sparse.get(index, 0)

    @property
    def counts(self) -> np.ndarray:
        """Dense count vector (materialized on demand for sparse histograms)."""
        if self._dense is not None:
            return self._dense.copy()
        dense = np.zeros(self.universe_size, dtype=np.int64)
        for index, count in self._sparse.items():
            dense[index] = count
        return dense

    def items(self) -> Iterator[Tuple[int, int]]:
        """Yield ``(index, count)`` pairs of non-zero counts in index order."""
        if self._dense is not None:
            for index in np.flatnonzero(self._dense):
                yield int(index), int(self._dense[index])
        else:
            for index in sorted(self._sparse):
                yield index, self._sparse[index]

    def sorted_counts(self) -> np.ndarray:
        """Non-zero counts in decreasing order."""
        return np.sort(np.array([c for _, c in self.items()], dtype=np.int64))[::-1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.universe_size == other.universe_size and list(
            self.items()
        ) == list(other.items())

    def __repr__(self) -> str:
        return f"Histogram(N={self.universe_size}, n={self.n})"


def build_histogram(records: Iterable[ClientRecord], universe_size: int) -> Histogram:
    """Sum the one-hot vectors of all client records.

    Raises:
        ValueError: if a record holds an element outside ``[0, N)``
    """
    counter: Counter = Counter()
    for record in records:
        check_index(record.element, universe_size)
        counter[record.element] += 1
    return Histogram(universe_size, dict(counter))


def heavy_hitter(histogram: Histogram) -> Tuple[UniverseIndex, int]:
    """Return the most frequent element and its count.

    Ties are broken in favor of the lowest index.

    >>> heavy_hitter(Histogram.from_counts([3, 3, 1]))
    (0, 3)
    """
    if histogram.n < 1:
        raise ValueError("Cannot compute the heavy hitter of an empty histogram")
    best_index, best_count = -1, -1
    for index, count in histogram.items():
        if count > best_count:
            best_index, best_count = index, count
    return best_index, best_count


def accuracy_deficit(histogram: Histogram, reported: UniverseIndex) -> int:
    """How much less frequent ``reported`` is than the true heavy hitter."""
    check_index(reported, histogram.universe_size)
    _, top = heavy_hitter(histogram)
    return top - histogram.count(reported)


def majority_vote(votes: Iterable[Optional[UniverseIndex]]) -> Optional[UniverseIndex]:
    """Most frequent non-``None`` vote, lowest index on ties.

    Returns :const:`None` when no vote was cast.

    >>> majority_vote([4, None, 2, 4, 2])
    2
    """
    tally = Counter(vote for vote in votes if vote is not None)
    if not tally:
        return None
    return min(tally, key=lambda index: (-tally[index], index))
