# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Pairwise independent parity hashes ``h_r(x) = <r, b(x)> mod 2``.

``b(x)`` is the binary expansion of ``x`` packed as in :mod:`swh.heavyhitters.gf2`,
and ``r`` ranges over the non-zero strings of ``d`` bits.
"""

from dataclasses import dataclass
import math

import numpy as np

from swh.heavyhitters.gf2 import BitMatrix

# rows are drawn as int64
MAX_HASH_BITS = 62


def bit_length(universe_size: int) -> int:
    """``ceil(log2(N))``, and at least 1."""
    if universe_size < 2:
        raise ValueError(f"Universe size must be at least 2, got {universe_size}")
    return (universe_size - 1).bit_length()


@dataclass(frozen=True)
class HashRow:
    """Parameter ``r`` of one parity hash over ``d``-bit inputs."""

    r: int
    d: int

    def __post_init__(self):
        if not 0 < self.r < (1 << self.d):
            raise ValueError(f"Hash parameter must be a non-zero {self.d}-bit string")


def eval_hash(row: HashRow, x: int) -> int:
    """Parity of the bits shared by ``r`` and ``x``.

    >>> eval_hash(HashRow(r=0b001, d=3), 5)
    1
    """
    return (row.r & x).bit_count() & 1


def sample_hash_matrix(d: int, k1: int, rng: np.random.Generator) -> BitMatrix:
    """Draw ``k1`` hash rows i.i.d. uniformly from the non-zero ``d``-bit strings.

    Draws are made with replacement; the zero string is rejected.
    """
    if d < 1 or k1 < 1:
        raise ValueError("Hash matrices need at least one bit and one row")
    if d > MAX_HASH_BITS:
        raise ValueError(f"Universes wider than {MAX_HASH_BITS} bits are not supported")
    rows = []
    while len(rows) < k1:
        r = int(rng.integers(0, 1 << d, dtype=np.int64))
        if r:
            rows.append(r)
    return BitMatrix(rows=k1, cols=d, bits=tuple(rows))


def hash_rows(matrix: BitMatrix):
    """The hash rows of a sampled matrix."""
    return [HashRow(r=r, d=matrix.cols) for r in matrix.bits]


def marginal_one_probability(d: int) -> float:
    """``Pr_r[h_r(x) = 1]`` for any non-zero ``x``: ``2^(d-1) / (2^d - 1)``."""
    return 2 ** (d - 1) / (2**d - 1)


def kwise_tail_constant(k: int) -> float:
    return 2 * math.sqrt(math.pi * k) * math.exp(k / 2 - 1 / (6 * k))


def kwise_tail_bound(c: float, t: float, k: int = 2) -> float:
    """Tail bound ``Pr[|X - mu| > t] <= C_k (c k / t^2)^(k/2)`` for a sum X of
    k-wise independent variables ``0 <= X_i <= c_i`` with ``c = sum c_i^2``."""
    if k < 2 or k % 2:
        raise ValueError("k must be a positive even integer")
    if not t > 0:
        raise ValueError("t must be positive")
    return kwise_tail_constant(k) * (c * k / t**2) ** (k / 2)
