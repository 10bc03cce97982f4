# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Linear algebra over GF(2) on bit-packed rows.

Rows are Python integers: bit ``j`` of a row is the entry of column ``j``, so
a row applied to a vector ``x`` (packed the same way) is the parity of
``row & x``.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np


@dataclass(frozen=True)
class BitMatrix:
    """Dense matrix over GF(2) stored as one packed integer per row."""

    rows: int
    cols: int
    bits: Tuple[int, ...]

    def __post_init__(self):
        if self.rows != len(self.bits):
            raise ValueError(f"Expected {self.rows} packed rows, got {len(self.bits)}")
        if self.cols < 1:
            raise ValueError("A bit matrix needs at least one column")
        for row in self.bits:
            if not 0 <= row < (1 << self.cols):
                raise ValueError(
                    f"Packed row {row} does not fit in {self.cols} columns"
                )

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "BitMatrix":
        """Build a matrix from lists of 0/1 entries, column 0 first."""
        if not rows:
            raise ValueError("A bit matrix needs at least one row")
        cols = len(rows[0])
        packed = []
        for row in rows:
            if len(row) != cols:
                raise ValueError("All rows must have the same length")
            packed.append(sum((bit & 1) << j for j, bit in enumerate(row)))
        return cls(rows=len(rows), cols=cols, bits=tuple(packed))

    @classmethod
    def identity(cls, size: int) -> "BitMatrix":
        return cls(rows=size, cols=size, bits=tuple(1 << j for j in range(size)))

    def entry(self, row: int, col: int) -> int:
        return (self.bits[row] >> col) & 1

    def multiply(self, x: int) -> Tuple[int, ...]:
        """Product ``H x (mod 2)`` of the matrix with a packed vector."""
        return tuple((row & x).bit_count() & 1 for row in self.bits)

    def to_array(self) -> np.ndarray:
        return np.array(
            [[self.entry(r, c) for c in range(self.cols)] for r in range(self.rows)],
            dtype=np.uint8,
        )


@dataclass(frozen=True)
class Unique:
    """The system has exactly one solution."""

    x: Tuple[int, ...]
    """solution bits, column 0 first"""

    @property
    def value(self) -> int:
        """Solution packed as an integer."""
        return sum(bit << j for j, bit in enumerate(self.x))


@dataclass(frozen=True)
class Infeasible:
    """The system has no solution."""


@dataclass(frozen=True)
class Underdetermined:
    """The system is consistent but has several solutions."""

    rank: int


Gf2Solution = Union[Unique, Infeasible, Underdetermined]


def pack_bits(bits: Sequence[int]) -> int:
    return sum((bit & 1) << j for j, bit in enumerate(bits))


def _eliminate(rows: List[int], cols: int) -> Tuple[List[int], List[int]]:
    """Gauss-Jordan elimination of the first ``cols`` columns, in place.

    Pivots are taken on the first row holding a set bit in the pivot column.
    Returns the reduced rows and the pivot column of each of the first
    ``len(pivots)`` rows.
    """
    pivots: List[int] = []
    top = 0
    for col in range(cols):
        mask = 1 << col
        pivot = next((r for r in range(top, len(rows)) if rows[r] & mask), None)
        if pivot is None:
            continue
        rows[top], rows[pivot] = rows[pivot], rows[top]
        for r in range(len(rows)):
            if r != top and rows[r] & mask:
                rows[r] ^= rows[top]
        pivots.append(col)
        top += 1
        if top == len(rows):
            break
    return rows, pivots


def rank(matrix: BitMatrix) -> int:
    """Rank of the matrix over GF(2)."""
    _, pivots = _eliminate(list(matrix.bits), matrix.cols)
    return len(pivots)


def solve(matrix: BitMatrix, b: Sequence[int]) -> Gf2Solution:
    """Solve ``H x = b (mod 2)``.

    Raises:
        ValueError: if ``b`` does not have one entry per row of ``H``
    """
    if len(b) != matrix.rows:
        raise ValueError(
            f"Right-hand side has {len(b)} entries, matrix has {matrix.rows} rows"
        )
    rhs_bit = 1 << matrix.cols
    augmented = [row | (rhs_bit if bit & 1 else 0) for row, bit in zip(matrix.bits, b)]
    reduced, pivots = _eliminate(augmented, matrix.cols)
    # a reduced row with no coefficient left but a set right-hand side reads 0 = 1
    if any(row == rhs_bit for row in reduced[len(pivots) :]):
        return Infeasible()
    if len(pivots) < matrix.cols:
        return Underdetermined(rank=len(pivots))
    x = [0] * matrix.cols
    for row, col in zip(reduced, pivots):
        x[col] = 1 if row & rhs_bit else 0
    return Unique(x=tuple(x))
