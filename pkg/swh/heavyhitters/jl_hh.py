# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Heavy hitters through a random +-1/sqrt(m) projection.

Each client sends ``A v^i + z^i`` once; the aggregator sums the messages into
``c`` and estimates the count of element ``p`` as ``<A e_p, c>``.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from swh.heavyhitters.core import (
    ClientRecord,
    HeavyHitterResult,
    UniverseIndex,
    check_index,
)
from swh.heavyhitters.privacy import (
    ClientPool,
    Clients,
    CommunicationMeter,
    LinearRandomizer,
    NoisePlan,
    PrivacyBudget,
    calibrate,
    derive_seed,
    respond_linear,
)
from swh.heavyhitters.utils import ceil_int

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.25

JL_ERROR_CONSTANT = 8.0
"""K in the max count error bound K sqrt(n ln(N/beta) ln(1/delta)) / epsilon"""


def choose_m(universe_size: int, beta: float, gamma: float) -> int:
    """Projection dimension ``ceil(log2(N+1) ln(2/beta) / gamma^2)``.

    >>> choose_m(1023, 0.1, 0.5)
    120
    """
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    if not 0 < beta < 1:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    return ceil_int(math.log2(universe_size + 1) * math.log(2 / beta) / gamma**2)


def inverse_square_gamma(n: int) -> float:
    """Distortion ``1/n^2`` that makes the projection bias O(1)."""
    if n < 2:
        raise ValueError("The 1/n^2 distortion needs at least two clients")
    return 1 / n**2


def jl_error_bound(
    n: int, universe_size: int, budget: PrivacyBudget, beta: float
) -> float:
    """Bound on the largest count error of a decode, up to the failure
    probability beta."""
    return (
        JL_ERROR_CONSTANT
        * math.sqrt(n * math.log(universe_size / beta) * -math.log(budget.delta))
        / budget.epsilon
    )


@dataclass(frozen=True)
class ProjectionSpec:
    """Random projection matrix A with m rows and N columns.

    In implicit mode, column ``i`` is regenerated on demand from
    ``(seed, i)``; an explicit matrix can be injected for tests.
    """

    m: int
    universe_size: int
    seed: int
    gamma: float = DEFAULT_GAMMA
    explicit: Optional[np.ndarray] = field(default=None, compare=False)
    _columns: Dict[int, np.ndarray] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("A projection needs at least one row")
        if self.explicit is not None and self.explicit.shape != (
            self.m,
            self.universe_size,
        ):
            raise ValueError(
                f"Explicit projection must have shape ({self.m}, {self.universe_size})"
            )

    @classmethod
    def for_universe(
        cls, universe_size: int, beta: float, seed: int, gamma: float = DEFAULT_GAMMA
    ) -> "ProjectionSpec":
        return cls(
            m=choose_m(universe_size, beta, gamma),
            universe_size=universe_size,
            seed=seed,
            gamma=gamma,
        )

    @property
    def mode(self) -> str:
        return "implicit" if self.explicit is None else "explicit"

    def generate_column(self, index: UniverseIndex) -> np.ndarray:
        if self.explicit is not None:
            return np.asarray(self.explicit[:, index], dtype=np.float64)
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([self.seed, index]))
        )
        signs = rng.integers(0, 2, size=self.m) * 2 - 1
        return signs / math.sqrt(self.m)

    def column(self, index: UniverseIndex) -> np.ndarray:
        """Column ``A e_index``, cached for repeated client lookups."""
        check_index(index, self.universe_size)
        if index not in self._columns:
            self._columns[index] = self.generate_column(index)
        return self._columns[index]


@dataclass(frozen=True)
class JlResponse:
    """Message ``q^i = A v^i + z^i`` of one client."""

    q: np.ndarray


def noise_plan(spec: ProjectionSpec, budget: PrivacyBudget) -> NoisePlan:
    """m queries of sensitivity 1/sqrt(m) each."""
    return calibrate(budget, T=spec.m, sensitivity=1 / math.sqrt(spec.m))


def client_respond(
    record: ClientRecord,
    spec: ProjectionSpec,
    budget: PrivacyBudget,
    rng: np.random.Generator,
    noiseless: bool = False,
) -> JlResponse:
    plan = noise_plan(spec, budget)
    if noiseless:
        plan = plan.without_noise()
    return JlResponse(q=respond_linear(record, spec.column, plan, rng))


def decode(c: np.ndarray, spec: ProjectionSpec) -> Tuple[UniverseIndex, np.ndarray]:
    """Estimate every count from the summed messages ``c``.

    Returns the index of the largest estimate (lowest index on ties) and the
    vector of estimates.
    """
    if c.shape != (spec.m,):
        raise ValueError(f"Expected an aggregate of length {spec.m}, got {c.shape}")
    counts = np.empty(spec.universe_size, dtype=np.float64)
    for p in range(spec.universe_size):
        counts[p] = spec.generate_column(p) @ c
    return int(np.argmax(counts)), counts


def aggregate_decode(
    responses: Sequence[JlResponse], spec: ProjectionSpec
) -> Tuple[UniverseIndex, np.ndarray]:
    """Sum the client messages once, then decode the counts."""
    if not responses:
        raise ValueError("Cannot decode without any client response")
    c = np.zeros(spec.m, dtype=np.float64)
    for response in responses:
        if response.q.shape != (spec.m,):
            raise ValueError(f"Client response must have length {spec.m}")
        c += response.q
    return decode(c, spec)


def estimate_frequency(counts: np.ndarray, index: UniverseIndex) -> float:
    check_index(index, len(counts))
    return float(counts[index])


def jl_counts(
    clients: Clients,
    universe_size: int,
    budget: PrivacyBudget,
    beta: float,
    master_seed: int,
    gamma: float = DEFAULT_GAMMA,
    noiseless: bool = False,
    meter: Optional[CommunicationMeter] = None,
) -> Tuple[UniverseIndex, np.ndarray]:
    """Run the whole local protocol and return ``(p*, counts)``.

    Args:
        clients: a :class:`ClientPool` or the client records to wrap in one
        universe_size: N, the size of the universe
        budget: privacy budget of every client
        beta: failure probability the projection dimension is sized for
        master_seed: seed of the public projection and of the client streams
        gamma: distortion of the projection
        noiseless: drop the Laplace noise, for pipeline tests only
        meter: records the size of every client message

    Raises:
        ValueError: if there is no client

    Returns:
        the index of the largest estimated count and all estimated counts
    """
    pool = ClientPool.of(clients)
    if pool.n == 0:
        raise ValueError("Cannot decode without any client response")
    spec = ProjectionSpec.for_universe(
        universe_size, beta, seed=derive_seed(master_seed, 0, "jl-matrix"), gamma=gamma
    )
    plan = noise_plan(spec, budget)
    if noiseless:
        plan = plan.without_noise()
    logger.debug(
        "JL projection: m=%d, N=%d, Laplace scale %.4g",
        spec.m,
        universe_size,
        plan.scale,
    )
    c = pool.sum_round(LinearRandomizer(spec.column, plan), master_seed, "jl", meter)
    return decode(c, spec)


def jl_hh(
    clients: Clients,
    universe_size: int,
    budget: PrivacyBudget,
    beta: float,
    master_seed: int,
    gamma: float = DEFAULT_GAMMA,
    noiseless: bool = False,
    meter: Optional[CommunicationMeter] = None,
) -> HeavyHitterResult:
    index, counts = jl_counts(
        clients, universe_size, budget, beta, master_seed, gamma, noiseless, meter
    )
    return HeavyHitterResult(
        index=index, reported_count=estimate_frequency(counts, index)
    )


def client_responses(
    clients: Clients,
    spec: ProjectionSpec,
    budget: PrivacyBudget,
    master_seed: int,
    noiseless: bool = False,
) -> List[JlResponse]:
    """Messages of all clients, each computed from its own stream."""
    plan = noise_plan(spec, budget)
    if noiseless:
        plan = plan.without_noise()
    messages = ClientPool.of(clients).local_round(
        LinearRandomizer(spec.column, plan), master_seed, "jl"
    )
    return [JlResponse(q=q) for q in messages]
