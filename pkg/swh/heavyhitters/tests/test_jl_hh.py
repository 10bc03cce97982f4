# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import math

import numpy as np
import pytest

from swh.heavyhitters.core import ClientRecord, build_histogram
from swh.heavyhitters.harness import DataGenSpec, Planted, generate
from swh.heavyhitters.jl_hh import (
    ProjectionSpec,
    aggregate_decode,
    choose_m,
    client_respond,
    client_responses,
    decode,
    estimate_frequency,
    jl_counts,
    jl_error_bound,
    jl_hh,
    noise_plan,
    inverse_square_gamma,
)
from swh.heavyhitters.privacy import (
    CommunicationMeter,
    PrivacyBudget,
    derive_rng,
    laplace_sum_tail,
)
from swh.heavyhitters.utils import fit_power_law_exponent

from .conftest import records_from_counts, records_of


@pytest.mark.parametrize(
    "gamma,expected", [(0.5, 40), (0.25, 160)],
)
def test_choose_m(gamma, expected):
    assert choose_m(1023, 2 / math.e, gamma) == expected


def test_choose_m_quadruples_when_gamma_halves():
    assert choose_m(1023, 2 / math.e, 0.125) == 4 * choose_m(1023, 2 / math.e, 0.25)


@pytest.mark.parametrize("gamma,beta", [(0, 0.1), (1, 0.1), (0.5, 0), (0.5, 1)])
def test_choose_m_invalid(gamma, beta):
    with pytest.raises(ValueError):
        choose_m(16, beta, gamma)


def test_inverse_square_gamma():
    assert inverse_square_gamma(10) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        inverse_square_gamma(1)


def test_projection_columns():
    spec = ProjectionSpec(m=16, universe_size=8, seed=3)
    column = spec.column(5)
    assert spec.mode == "implicit"
    assert column.shape == (16,)
    np.testing.assert_allclose(np.abs(column), 1 / 4)
    np.testing.assert_array_equal(column, spec.generate_column(5))
    np.testing.assert_array_equal(
        column, ProjectionSpec(m=16, universe_size=8, seed=3).column(5)
    )
    assert not np.array_equal(
        column, ProjectionSpec(m=16, universe_size=8, seed=4).column(5)
    )
    with pytest.raises(ValueError):
        spec.column(8)


def test_projection_explicit_shape():
    with pytest.raises(ValueError):
        ProjectionSpec(m=2, universe_size=3, seed=0, explicit=np.eye(3))


def test_client_respond_noiseless(rng, unit_budget):
    explicit = np.zeros((4, 3))
    explicit[:, 1] = np.array([1, -1, 1, 1]) / 2
    spec = ProjectionSpec(m=4, universe_size=3, seed=0, explicit=explicit)
    assert spec.mode == "explicit"
    response = client_respond(
        ClientRecord(owner=0, element=1), spec, unit_budget, rng, noiseless=True
    )
    np.testing.assert_array_equal(response.q, [0.5, -0.5, 0.5, 0.5])


def test_client_respond_deterministic(unit_budget):
    spec = ProjectionSpec(m=8, universe_size=4, seed=1)
    record = ClientRecord(owner=2, element=3)
    first = client_respond(record, spec, unit_budget, derive_rng(0, 2, "jl"))
    second = client_respond(record, spec, unit_budget, derive_rng(0, 2, "jl"))
    np.testing.assert_array_equal(first.q, second.q)


def test_noise_scale():
    budget = PrivacyBudget(epsilon=1.0, delta=math.exp(-8))
    for m in (4, 64, 1000):
        spec = ProjectionSpec(m=m, universe_size=4, seed=0)
        assert noise_plan(spec, budget).scale == pytest.approx(8.0)


def test_aggregate_decode_identity_projection(unit_budget):
    spec = ProjectionSpec(m=3, universe_size=3, seed=0, explicit=np.eye(3))
    responses = client_responses(
        records_of([0, 1, 1]), spec, unit_budget, master_seed=0, noiseless=True
    )
    index, counts = aggregate_decode(responses, spec)
    assert index == 1
    np.testing.assert_allclose(counts, [1, 2, 0])
    assert estimate_frequency(counts, 0) == pytest.approx(1)


def test_aggregate_decode_empty():
    with pytest.raises(ValueError):
        aggregate_decode([], ProjectionSpec(m=3, universe_size=3, seed=0))


def test_decode_shape_mismatch():
    with pytest.raises(ValueError):
        decode(np.zeros(4), ProjectionSpec(m=3, universe_size=3, seed=0))


def test_estimate_frequency():
    assert estimate_frequency(np.array([1.5, 3.2]), 1) == 3.2
    with pytest.raises(ValueError):
        estimate_frequency(np.array([1.5, 3.2]), 2)


def test_noiseless_planted_recovery(budget):
    counts = [0] * 64
    counts[17] = 50
    counts[3] = 6
    counts[40] = 4
    for seed in range(5):
        index, _ = jl_counts(
            records_from_counts(counts),
            64,
            budget,
            0.1,
            master_seed=seed,
            gamma=0.1,
            noiseless=True,
        )
        assert index == 17


def test_noiseless_single_client(budget):
    hits = 0
    for seed in range(20):
        index, _ = jl_counts(
            [ClientRecord(owner=0, element=seed % 64)],
            64,
            budget,
            0.1,
            master_seed=seed,
            noiseless=True,
        )
        hits += index == seed % 64
    assert hits >= 18


def test_noisy_count_within_laplace_tail():
    budget = PrivacyBudget(epsilon=1.0, delta=1e-5)
    beta = 0.1
    records = records_from_counts([100, 100])
    within = 0
    for seed in range(20):
        spec = ProjectionSpec.for_universe(2, beta, seed=0)
        _, counts = jl_counts(records, 2, budget, beta, master_seed=seed)
        plan = noise_plan(spec, budget)
        bound = laplace_sum_tail(
            len(records) * spec.m, plan.scale / math.sqrt(spec.m), beta
        )
        within += abs(estimate_frequency(counts, 0) - 100) <= bound
    assert within >= 18


def test_max_count_error_within_bound(budget):
    n, universe_size, beta = 1000, 256, 0.1
    within = 0
    for seed in range(50):
        records = generate(
            DataGenSpec(Planted(5, n // 4), n=n, universe_size=universe_size, seed=seed)
        )
        truth = build_histogram(records, universe_size).counts
        _, counts = jl_counts(records, universe_size, budget, beta, master_seed=seed)
        error = np.max(np.abs(counts - truth))
        within += error <= jl_error_bound(n, universe_size, budget, beta)
    assert within >= 45


def test_max_count_error_grows_as_sqrt_n(budget):
    universe_size, beta = 256, 0.1
    ns = [250, 1000, 4000]
    medians = []
    for n in ns:
        errors = []
        for seed in range(50):
            records = generate(
                DataGenSpec(
                    Planted(5, n // 4), n=n, universe_size=universe_size, seed=seed
                )
            )
            truth = build_histogram(records, universe_size).counts
            _, counts = jl_counts(
                records, universe_size, budget, beta, master_seed=seed
            )
            errors.append(np.max(np.abs(counts - truth)))
        medians.append(float(np.median(errors)))
    assert 0.35 < fit_power_law_exponent(ns, medians) < 0.65


def test_planted_gap_recovered():
    budget = PrivacyBudget(epsilon=8.0, delta=1e-5)
    n, universe_size, beta = 4000, 256, 0.1
    recovered = 0
    for seed in range(50):
        records = generate(
            DataGenSpec(
                Planted(77, n // 2), n=n, universe_size=universe_size, seed=seed
            )
        )
        histogram = build_histogram(records, universe_size)
        second = histogram.sorted_counts()[1]
        assert n // 2 - second > 10 * math.sqrt(
            n * math.log(universe_size / beta) * -math.log(budget.delta)
        ) / budget.epsilon
        result = jl_hh(records, universe_size, budget, beta, master_seed=seed)
        if result.index == 77:
            recovered += 1
            assert result.reported_count == pytest.approx(n // 2, rel=0.2)
    assert recovered >= 45


def test_jl_metering(budget):
    meter = CommunicationMeter()
    jl_hh(records_of([1, 2, 3, 3]), 2**16, budget, 0.1, master_seed=0, meter=meter)
    m = choose_m(2**16, 0.1, 0.25)
    assert meter.per_client_message_reals == m
    assert m < 2**16 // 10


def test_jl_no_records(budget):
    with pytest.raises(ValueError):
        jl_hh([], 16, budget, 0.1, master_seed=0)
