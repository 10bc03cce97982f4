# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import math
from typing import Sequence

import numpy as np


def ceil_int(value: float) -> int:
    """Ceiling of a formula whose exact value may be an integer.

    Values within 1e-9 of an integer are rounded to it first so that float
    noise in e.g. ``ln(e)`` does not add one.
    """
    nearest = round(value)
    if abs(value - nearest) < 1e-9:
        return int(nearest)
    return math.ceil(value)


def fit_power_law_exponent(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Exponent p of the least squares fit ``y ~ C x^p`` in log-log space."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("A power law fit needs at least two paired points")
    if min(xs) <= 0 or min(ys) <= 0:
        raise ValueError("A power law fit needs positive values")
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


def top_s_truncation(v: np.ndarray, s: int) -> np.ndarray:
    """Best s-sparse approximation of ``v``: its ``s`` entries of largest
    magnitude, every other entry set to zero (lowest index first on ties)."""
    if s < 0:
        raise ValueError(f"Sparsity must be non-negative, got {s}")
    v = np.asarray(v, dtype=np.float64)
    truncated = np.zeros_like(v)
    if s:
        kept = np.argsort(-np.abs(v), kind="stable")[:s]
        truncated[kept] = v[kept]
    return truncated


def truncation_error(v: np.ndarray, s: int) -> float:
    """``||v - v_s||_2`` for the best s-sparse approximation ``v_s``."""
    v = np.asarray(v, dtype=np.float64)
    return float(np.linalg.norm(v - top_s_truncation(v, s)))
