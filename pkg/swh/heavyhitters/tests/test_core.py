# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import numpy as np
import pytest

from swh.heavyhitters.core import (
    DENSE_HISTOGRAM_MAX_UNIVERSE,
    AccuracyParams,
    ClientRecord,
    Histogram,
    MechanismFailure,
    NoCandidateError,
    accuracy_deficit,
    build_histogram,
    check_index,
    heavy_hitter,
    majority_vote,
)

from .conftest import records_of


def test_build_histogram():
    histogram = build_histogram(records_of([0, 1, 1]), 3)
    assert list(histogram.counts) == [1, 2, 0]
    assert histogram.n == 3


def test_build_histogram_empty():
    histogram = build_histogram([], 2)
    assert list(histogram.counts) == [0, 0]
    assert histogram.n == 0


def test_build_histogram_single_element():
    histogram = build_histogram(records_of([4] * 5), 5)
    assert list(histogram.counts) == [0, 0, 0, 0, 5]


def test_build_histogram_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        build_histogram(records_of([0, 3]), 3)


@pytest.mark.parametrize("index,universe_size", [(-1, 4), (4, 4), (0, 1)])
def test_check_index_invalid(index, universe_size):
    with pytest.raises(ValueError):
        check_index(index, universe_size)


@pytest.mark.parametrize(
    "counts,expected",
    [([1, 2, 0], (1, 2)), ([3, 3, 1], (0, 3)), ([0, 0, 5], (2, 5))],
)
def test_heavy_hitter(counts, expected):
    assert heavy_hitter(Histogram.from_counts(counts)) == expected


def test_heavy_hitter_empty():
    with pytest.raises(ValueError, match="empty"):
        heavy_hitter(Histogram.from_counts([0, 0]))


@pytest.mark.parametrize("reported,deficit", [(1, 0), (0, 1), (2, 2)])
def test_accuracy_deficit(reported, deficit):
    assert accuracy_deficit(Histogram.from_counts([1, 2, 0]), reported) == deficit


def test_accuracy_params():
    params = AccuracyParams(alpha=2, beta=0.1)
    assert params.satisfied_by(2)
    assert not params.satisfied_by(3)
    with pytest.raises(ValueError):
        AccuracyParams(alpha=1, beta=1.5)


def test_sparse_histogram():
    universe_size = DENSE_HISTOGRAM_MAX_UNIVERSE * 2
    records = [
        ClientRecord(owner=0, element=universe_size - 1),
        ClientRecord(owner=1, element=7),
        ClientRecord(owner=2, element=universe_size - 1),
    ]
    histogram = build_histogram(records, universe_size)
    assert not histogram.is_dense
    assert histogram.n == 3
    assert histogram.count(universe_size - 1) == 2
    assert histogram.count(8) == 0
    assert list(histogram.items()) == [(7, 1), (universe_size - 1, 2)]
    assert heavy_hitter(histogram) == (universe_size - 1, 2)


def test_histogram_equality_and_sorted_counts():
    histogram = Histogram.from_counts([1, 0, 4, 2])
    assert histogram == build_histogram(records_of([0, 2, 2, 2, 2, 3, 3]), 4)
    assert histogram != Histogram.from_counts([1, 0, 4, 1])
    np.testing.assert_array_equal(histogram.sorted_counts(), [4, 2, 1])


def test_histogram_negative_counts():
    with pytest.raises(ValueError, match="non-negative"):
        Histogram.from_counts([1, -1])


@pytest.mark.parametrize(
    "votes,expected",
    [
        ([4, None, 2, 4, 2], 2),
        ([3, 3, 1], 3),
        ([None, None], None),
        ([], None),
        ([5], 5),
    ],
)
def test_majority_vote(votes, expected):
    assert majority_vote(votes) == expected


def test_mechanism_failure_message():
    error = NoCandidateError("bucket", "no trial decoded")
    assert isinstance(error, MechanismFailure)
    assert str(error) == "Mechanism 'bucket' failed: no trial decoded."
