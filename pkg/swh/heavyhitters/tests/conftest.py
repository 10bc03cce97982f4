# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import math

import numpy as np
import pytest

from swh.heavyhitters.core import ClientRecord
from swh.heavyhitters.privacy import PrivacyBudget


def records_of(elements):
    return [
        ClientRecord(owner=owner, element=element)
        for owner, element in enumerate(elements)
    ]


def records_from_counts(counts):
    return records_of(
        [element for element, count in enumerate(counts) for _ in range(count)]
    )


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(2026)))


@pytest.fixture
def unit_budget():
    """epsilon = 1 and ln(1/delta) = 1"""
    return PrivacyBudget(epsilon=1.0, delta=math.exp(-1))


@pytest.fixture
def budget():
    return PrivacyBudget(epsilon=1.0, delta=1e-5)
