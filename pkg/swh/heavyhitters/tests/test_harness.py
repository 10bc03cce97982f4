# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import math

import numpy as np
import pytest

from swh.heavyhitters.bucket_hh import bucket_params
from swh.heavyhitters.core import (
    HeavyHitterResult,
    Histogram,
    NoCandidateError,
    build_histogram,
)
from swh.heavyhitters.harness import (
    MECHANISMS,
    Custom,
    DataGenSpec,
    Planted,
    ProtocolOptions,
    UniformBits,
    Zipf,
    estimate_count,
    generate,
    lower_bound_experiment,
    message_reals,
    naive_baseline,
    run_protocol,
    zipf_probabilities,
)
from swh.heavyhitters.jl_hh import choose_m
from swh.heavyhitters.privacy import ClientPool, CommunicationMeter, PrivacyBudget
from swh.heavyhitters.sketch_hh import measurement_count

from .conftest import records_from_counts

LOWER_BOUND_BUDGET = PrivacyBudget(epsilon=0.5, delta=1e-5)


def test_generate_uniform_bits():
    records = generate(DataGenSpec(UniformBits(), n=100_000, universe_size=2))
    ones = sum(record.element for record in records)
    assert ones / len(records) == pytest.approx(0.5, abs=0.01)
    assert [record.owner for record in records] == list(range(100_000))


def test_generate_planted():
    records = generate(DataGenSpec(Planted(3, 70), n=100, universe_size=16, seed=4))
    histogram = build_histogram(records, 16)
    assert len(records) == 100
    assert histogram.count(3) == 70
    assert sum(histogram.count(i) for i in range(16) if i != 3) == 30


def test_generate_zipf():
    records = generate(DataGenSpec(Zipf(2.0), n=100_000, universe_size=4, seed=1))
    counts = build_histogram(records, 4).counts
    np.testing.assert_allclose(
        counts / 100_000, zipf_probabilities(4, 2.0), atol=0.02
    )


def test_generate_custom():
    records = generate(DataGenSpec(Custom((2, 0, 3)), n=5, universe_size=3))
    assert build_histogram(records, 3) == Histogram.from_counts([2, 0, 3])


def test_generate_deterministic():
    spec = DataGenSpec(Zipf(1.5), n=500, universe_size=32, seed=12)
    assert generate(spec) == generate(spec)
    other = DataGenSpec(Zipf(1.5), n=500, universe_size=32, seed=13)
    assert generate(spec) != generate(other)


@pytest.mark.parametrize(
    "spec",
    [
        DataGenSpec(UniformBits(), n=10, universe_size=4),
        DataGenSpec(Planted(16, 3), n=10, universe_size=16),
        DataGenSpec(Planted(1, 11), n=10, universe_size=16),
        DataGenSpec(Custom((1, 2)), n=10, universe_size=2),
        DataGenSpec(Custom((1, 2, 7)), n=10, universe_size=2),
        DataGenSpec(Zipf(0.0), n=10, universe_size=8),
        DataGenSpec(Zipf(1.0), n=0, universe_size=8),
    ],
)
def test_generate_invalid(spec):
    with pytest.raises(ValueError):
        generate(spec)


def test_naive_baseline_noiseless():
    records = records_from_counts([3, 0, 5, 1])
    meter = CommunicationMeter()
    index, counts = naive_baseline(records, 4, 1.0, noiseless=True, meter=meter)
    assert index == 2
    np.testing.assert_array_equal(counts, [3, 0, 5, 1])
    assert meter.per_client_message_reals == 4


PLANTED = DataGenSpec(Planted(5, 60), n=100, universe_size=16, seed=2)


@pytest.mark.parametrize("mechanism", sorted(MECHANISMS))
def test_run_protocol_metering(mechanism, budget):
    records = generate(PLANTED)
    summary = run_protocol(mechanism, records, 16, budget, 0.1, master_seed=3)
    assert summary.per_client_message_reals == summary.total_client_queries
    assert summary.true_hh_index == 5
    assert summary.master_seed == 3
    assert (summary.result is None) == (summary.failure is not None)


@pytest.mark.parametrize("mechanism", ["jl", "bucket", "naive"])
def test_run_protocol_noiseless(mechanism, budget):
    records = generate(PLANTED)
    summary = run_protocol(
        mechanism,
        records,
        16,
        budget,
        0.1,
        master_seed=0,
        options=ProtocolOptions(noiseless=True),
    )
    assert summary.failure is None
    assert summary.result.index == 5
    assert summary.result.true_deficit == 0


def test_run_protocol_deterministic(budget):
    records = generate(PLANTED)
    first = run_protocol("jl", records, 16, budget, 0.1, master_seed=9)
    second = run_protocol("jl", records, 16, budget, 0.1, master_seed=9)
    assert first == second


def test_run_protocol_records_failures(mocker, budget):
    def fail(*args):
        raise NoCandidateError("jl", "nothing decoded")

    mocker.patch.dict(MECHANISMS, {"jl": fail})
    summary = run_protocol("jl", generate(PLANTED), 16, budget, 0.1, master_seed=0)
    assert summary.result is None
    assert summary.failure == "nothing decoded"
    assert summary.total_client_queries == choose_m(16, 0.1, 0.25)


def test_run_protocol_hands_a_client_pool_to_mechanisms(mocker, budget):
    mechanism = mocker.Mock(return_value=HeavyHitterResult(index=5, reported_count=1))
    mocker.patch.dict(MECHANISMS, {"jl": mechanism})
    run_protocol("jl", generate(PLANTED), 16, budget, 0.1, master_seed=0)
    (clients, universe_size, *_), _ = mechanism.call_args
    assert isinstance(clients, ClientPool)
    assert clients.n == PLANTED.n
    assert universe_size == 16


def test_run_protocol_unknown_mechanism(budget):
    with pytest.raises(ValueError, match="Unknown mechanism"):
        run_protocol("rappor", generate(PLANTED), 16, budget, 0.1, master_seed=0)


def test_message_reals(budget):
    assert message_reals("jl", 100, 64, budget, 0.1) == choose_m(64, 0.1, 0.25)
    assert message_reals("naive", 100, 64, budget, 0.1) == 64
    params = bucket_params(64, budget, 0.1)
    assert message_reals("bucket", 100, 64, budget, 0.1) == params.k1 * params.k2
    options = ProtocolOptions(repeats=3, sparsity=2)
    assert message_reals("glps", 100, 64, budget, 0.1, options) == (
        3 * measurement_count(64, 2)
    )


def test_estimate_count_rejects_search_mechanisms(budget):
    records = generate(DataGenSpec(UniformBits(), n=10, universe_size=2))
    with pytest.raises(ValueError, match="does not estimate"):
        estimate_count("bucket", records, 2, budget, 0.1, 0, index=1)


def test_lower_bound_naive_noiseless():
    median = lower_bound_experiment(
        "naive", 100, 10, LOWER_BOUND_BUDGET, noiseless=True
    )
    assert median == 0


def test_lower_bound_jl():
    noisy = lower_bound_experiment("jl", 400, 50, LOWER_BOUND_BUDGET)
    assert noisy >= 6
    noiseless = lower_bound_experiment(
        "jl", 400, 50, LOWER_BOUND_BUDGET, noiseless=True
    )
    assert noiseless <= 0.1 * noisy


@pytest.mark.parametrize("mechanism", ["jl", "naive"])
def test_lower_bound_error_scales_with_sqrt_n(mechanism):
    ratios = [
        lower_bound_experiment(mechanism, n, 100, LOWER_BOUND_BUDGET) / math.sqrt(n)
        for n in (100, 400, 1600)
    ]
    assert min(ratios) >= 0.3
    assert max(ratios) / min(ratios) < 2


def test_lower_bound_invalid_runs():
    with pytest.raises(ValueError):
        lower_bound_experiment("jl", 100, 0, LOWER_BOUND_BUDGET)
