# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Simulation of the n-client local model.

Mechanisms only ever see client data through a
:class:`swh.heavyhitters.privacy.ClientPool`, which tells them the number of
clients and hands one record at a time to a local randomizer.
"""

from dataclasses import dataclass, field
import logging
import math
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from swh.heavyhitters.bucket_hh import bucket_hh, bucket_params
from swh.heavyhitters.core import (
    ClientRecord,
    HeavyHitterResult,
    MechanismFailure,
    UniverseIndex,
    accuracy_deficit,
    build_histogram,
    check_index,
    heavy_hitter,
)
from swh.heavyhitters.jl_hh import (
    DEFAULT_GAMMA,
    choose_m,
    estimate_frequency,
    jl_counts,
    jl_hh,
)
from swh.heavyhitters.privacy import (
    ClientPool,
    Clients,
    CommunicationMeter,
    LinearRandomizer,
    PrivacyBudget,
    derive_rng,
    laplace_plan,
)
from swh.heavyhitters.sketch_hh import glps_hh, measurement_count, repeat_sparsity

logger = logging.getLogger(__name__)

LOWER_BOUND_UNIVERSE = 2

LOWER_BOUND_GAMMA = 1 / 8
"""projection distortion used by JL-HH in the lower-bound experiment"""

LOWER_BOUND_CAVEAT = (
    "Median errors of the mechanisms implemented here only; this is evidence "
    "for, not a proof of, an Omega(sqrt(n)) error lower bound for all "
    "local mechanisms."
)


@dataclass(frozen=True)
class Planted:
    """``hh_count`` clients hold ``hh_index``, the others are spread uniformly
    over the remaining elements."""

    hh_index: int
    hh_count: int


@dataclass(frozen=True)
class Zipf:
    """Elements drawn with probability proportional to ``(i + 1)^-exponent``."""

    exponent: float


@dataclass(frozen=True)
class UniformBits:
    """Every client holds 0 or 1 uniformly at random (N = 2)."""


@dataclass(frozen=True)
class Custom:
    """Fixed histogram, the clients are shuffled."""

    counts: Tuple[int, ...]


DataKind = Union[Planted, Zipf, UniformBits, Custom]


@dataclass(frozen=True)
class DataGenSpec:
    kind: DataKind
    n: int
    universe_size: int
    seed: int = 0


def zipf_probabilities(universe_size: int, exponent: float) -> np.ndarray:
    weights = np.arange(1, universe_size + 1, dtype=np.float64) ** -exponent
    return weights / weights.sum()


def generate(spec: DataGenSpec) -> List[ClientRecord]:
    """Draw the database described by ``spec``, owner ``i`` being client ``i``.

    Raises:
        ValueError: if ``spec`` cannot be realized
    """
    n, N = spec.n, spec.universe_size
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if N < 2:
        raise ValueError(f"Universe size must be at least 2, got {N}")
    rng = derive_rng(spec.seed, 0, "data")
    kind = spec.kind
    if isinstance(kind, Planted):
        check_index(kind.hh_index, N)
        if not 0 <= kind.hh_count <= n:
            raise ValueError(
                f"Planted count {kind.hh_count} must be in [0, n={n}]"
            )
        others = rng.integers(0, N - 1, size=n - kind.hh_count)
        # shift the draws over [0, N-1) past the planted index
        others = others + (others >= kind.hh_index)
        elements = np.concatenate(
            [np.full(kind.hh_count, kind.hh_index, dtype=np.int64), others]
        )
        elements = rng.permutation(elements)
    elif isinstance(kind, Zipf):
        if not kind.exponent > 0:
            raise ValueError(f"Zipf exponent must be positive, got {kind.exponent}")
        elements = rng.choice(N, size=n, p=zipf_probabilities(N, kind.exponent))
    elif isinstance(kind, UniformBits):
        if N != 2:
            raise ValueError(f"Uniform bits need a universe of size 2, got {N}")
        elements = rng.integers(0, 2, size=n)
    elif isinstance(kind, Custom):
        if len(kind.counts) != N:
            raise ValueError(
                f"Custom histogram has {len(kind.counts)} entries, expected {N}"
            )
        if any(c < 0 for c in kind.counts) or sum(kind.counts) != n:
            raise ValueError(f"Custom counts must be non-negative and sum to n={n}")
        elements = rng.permutation(np.repeat(np.arange(N), kind.counts))
    else:
        raise ValueError(f"Unknown data kind {kind!r}")
    return [
        ClientRecord(owner=owner, element=int(element))
        for owner, element in enumerate(elements)
    ]


def _one_hot(universe_size: int) -> Callable[[int], np.ndarray]:
    def row(element: int) -> np.ndarray:
        check_index(element, universe_size)
        histogram = np.zeros(universe_size, dtype=np.float64)
        histogram[element] = 1.0
        return histogram

    return row


def naive_baseline(
    clients: Clients,
    universe_size: int,
    epsilon: float,
    master_seed: int = 0,
    noiseless: bool = False,
    replacement: bool = False,
    meter: Optional[CommunicationMeter] = None,
) -> Tuple[UniverseIndex, np.ndarray]:
    """Every client sends its full histogram with Lap(1/epsilon) on each entry.

    Returns ``(p*, counts)`` where ``counts`` is the noisy aggregate.
    """
    pool = ClientPool.of(clients)
    if pool.n == 0:
        raise ValueError("Cannot decode without any client response")
    plan = laplace_plan(epsilon, universe_size, replacement=replacement)
    if noiseless:
        plan = plan.without_noise()
    counts = pool.sum_round(
        LinearRandomizer(_one_hot(universe_size), plan),
        master_seed,
        "naive",
        meter,
    )
    return int(np.argmax(counts)), counts


@dataclass(frozen=True)
class ProtocolOptions:
    """Mechanism specific knobs, ignored by the mechanisms they do not apply to."""

    gamma: float = DEFAULT_GAMMA
    sparsity: Optional[int] = None
    repeats: int = 1
    k1_rule: str = "exact-recovery"
    noiseless: bool = False


@dataclass
class TranscriptSummary:
    mechanism: str
    result: Optional[HeavyHitterResult]
    """``None`` when the mechanism failed"""
    failure: Optional[str]
    """reason of a :class:`MechanismFailure`"""
    per_client_message_reals: int
    total_client_queries: int
    """analytic number T of reals each client is asked for"""
    master_seed: int
    true_hh_index: UniverseIndex
    wall_time: float = field(default=0.0, compare=False)
    """seconds, excluded from comparisons"""


Mechanism = Callable[
    [
        ClientPool,
        int,
        PrivacyBudget,
        float,
        int,
        ProtocolOptions,
        CommunicationMeter,
    ],
    HeavyHitterResult,
]


def _run_jl(clients, universe_size, budget, beta, master_seed, options, meter):
    return jl_hh(
        clients,
        universe_size,
        budget,
        beta,
        master_seed,
        gamma=options.gamma,
        noiseless=options.noiseless,
        meter=meter,
    )


def _run_glps(clients, universe_size, budget, beta, master_seed, options, meter):
    return glps_hh(
        clients,
        universe_size,
        budget,
        beta,
        repeats=options.repeats,
        master_seed=master_seed,
        sparsity=options.sparsity,
        noiseless=options.noiseless,
        meter=meter,
    )


def _run_bucket(clients, universe_size, budget, beta, master_seed, options, meter):
    return bucket_hh(
        clients,
        universe_size,
        budget,
        beta,
        master_seed=master_seed,
        k1_rule=options.k1_rule,
        noiseless=options.noiseless,
        meter=meter,
    )


def _run_naive(clients, universe_size, budget, beta, master_seed, options, meter):
    index, counts = naive_baseline(
        clients,
        universe_size,
        budget.epsilon,
        master_seed,
        noiseless=options.noiseless,
        replacement=budget.replacement,
        meter=meter,
    )
    return HeavyHitterResult(
        index=index, reported_count=estimate_frequency(counts, index)
    )


MECHANISMS: Dict[str, Mechanism] = {
    "jl": _run_jl,
    "glps": _run_glps,
    "bucket": _run_bucket,
    "naive": _run_naive,
}


def message_reals(
    mechanism: str,
    n: int,
    universe_size: int,
    budget: PrivacyBudget,
    beta: float,
    options: ProtocolOptions = ProtocolOptions(),
) -> int:
    """Analytic number of reals each client sends."""
    if mechanism == "jl":
        return choose_m(universe_size, beta, options.gamma)
    if mechanism == "glps":
        repeat_budget = budget.split(options.repeats)
        s = repeat_sparsity(n, universe_size, repeat_budget, beta, options.sparsity)
        return options.repeats * measurement_count(universe_size, s)
    if mechanism == "bucket":
        return bucket_params(
            universe_size, budget, beta, options.k1_rule
        ).queries_per_client
    if mechanism == "naive":
        return universe_size
    raise ValueError(
        f"Unknown mechanism '{mechanism}', expected one of {sorted(MECHANISMS)}"
    )


def run_protocol(
    mechanism: str,
    records: Sequence[ClientRecord],
    universe_size: int,
    budget: PrivacyBudget,
    beta: float,
    master_seed: int,
    options: ProtocolOptions = ProtocolOptions(),
) -> TranscriptSummary:
    """Run one mechanism over the local clients and meter the traffic.

    The mechanism only gets a :class:`ClientPool` over ``records``; the true
    heavy hitter is computed here, outside of the mechanism.

    Args:
        mechanism: name of the mechanism, a key of :data:`MECHANISMS`
        records: one record per client
        universe_size: N, the size of the universe
        budget: privacy budget of every client
        beta: failure probability
        master_seed: seed of every random stream of the run
        options: mechanism specific knobs

    Raises:
        ValueError: if the mechanism is unknown or rejects its parameters

    Returns:
        the transcript of the run, holding the failure reason if the mechanism
        raised a :class:`MechanismFailure`
    """
    if mechanism not in MECHANISMS:
        raise ValueError(
            f"Unknown mechanism '{mechanism}', expected one of {sorted(MECHANISMS)}"
        )
    records = list(records)
    histogram = build_histogram(records, universe_size)
    true_index, _ = heavy_hitter(histogram)
    pool = ClientPool(records)
    meter = CommunicationMeter()
    result: Optional[HeavyHitterResult] = None
    failure: Optional[str] = None
    start = time.monotonic()
    try:
        result = MECHANISMS[mechanism](
            pool, universe_size, budget, beta, master_seed, options, meter
        )
        result.true_deficit = accuracy_deficit(histogram, result.index)
    except MechanismFailure as e:
        logger.info("%s", e)
        failure = e.reason
    wall_time = time.monotonic() - start
    summary = TranscriptSummary(
        mechanism=mechanism,
        result=result,
        failure=failure,
        per_client_message_reals=meter.per_client_message_reals,
        total_client_queries=message_reals(
            mechanism, pool.n, universe_size, budget, beta, options
        ),
        master_seed=master_seed,
        true_hh_index=true_index,
        wall_time=wall_time,
    )
    logger.info(
        "%s run with seed %d: reported %s (deficit %s), %d reals per client, %.3fs",
        mechanism,
        master_seed,
        result.index if result else "nothing",
        result.true_deficit if result else "-",
        summary.per_client_message_reals,
        wall_time,
    )
    return summary


def estimate_count(
    mechanism: str,
    records: Sequence[ClientRecord],
    universe_size: int,
    budget: PrivacyBudget,
    beta: float,
    master_seed: int,
    index: UniverseIndex,
    noiseless: bool = False,
    gamma: float = LOWER_BOUND_GAMMA,
) -> float:
    """Count estimate of ``index`` by a mechanism that estimates every count."""
    if mechanism == "jl":
        _, counts = jl_counts(
            records,
            universe_size,
            budget,
            beta,
            master_seed,
            gamma=gamma,
            noiseless=noiseless,
        )
    elif mechanism == "naive":
        _, counts = naive_baseline(
            records,
            universe_size,
            budget.epsilon,
            master_seed,
            noiseless=noiseless,
            replacement=budget.replacement,
        )
    else:
        raise ValueError(
            f"Mechanism '{mechanism}' does not estimate frequencies, "
            "use 'jl' or 'naive'"
        )
    return estimate_frequency(counts, index)


def lower_bound_experiment(
    mechanism: str,
    n: int,
    runs: int,
    budget: PrivacyBudget,
    beta: float = 0.1,
    master_seed: int = 0,
    noiseless: bool = False,
    gamma: float = LOWER_BOUND_GAMMA,
) -> float:
    """Median over ``runs`` uniform bit databases of the absolute error made
    on the count of element 1."""
    if runs < 1:
        raise ValueError(f"The number of runs must be positive, got {runs}")
    errors = []
    for run in range(runs):
        seed = master_seed + run
        records = generate(
            DataGenSpec(
                UniformBits(), n=n, universe_size=LOWER_BOUND_UNIVERSE, seed=seed
            )
        )
        true_count = sum(record.element for record in records)
        estimate = estimate_count(
            mechanism,
            records,
            LOWER_BOUND_UNIVERSE,
            budget,
            beta,
            seed,
            index=1,
            noiseless=noiseless,
            gamma=gamma,
        )
        errors.append(abs(estimate - true_count))
    median = float(np.median(errors))
    logger.info(
        "Lower bound %s n=%d: median error %.3f (%.3f sqrt(n))",
        mechanism,
        n,
        median,
        median / math.sqrt(n),
    )
    return median
