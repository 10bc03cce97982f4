# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Laplace noise, privacy calibration and the local randomizer contract.

Every ``log`` of a privacy formula is a natural logarithm.
"""

from collections import defaultdict
from dataclasses import dataclass, replace
import logging
import math
from typing import Callable, Dict, Iterable, Iterator, Optional, Union
import zlib

import numpy as np
from typing_extensions import Protocol

from swh.heavyhitters.core import ClientRecord

logger = logging.getLogger(__name__)

QueryRows = Callable[[int], np.ndarray]
"""Rows of an implicit query matrix evaluated at one universe element"""


@dataclass(frozen=True)
class PrivacyBudget:
    """(epsilon, delta) differential privacy budget of each individual."""

    epsilon: float
    delta: float
    replacement: bool = False
    """use the replacement neighboring convention, doubling sensitivities"""

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")

    def split(self, parts: int) -> "PrivacyBudget":
        """Budget of one of ``parts`` mechanisms composed sequentially."""
        if parts < 1:
            raise ValueError(
                "A budget can only be split into a positive number of parts"
            )
        return replace(self, epsilon=self.epsilon / parts, delta=self.delta / parts)


@dataclass(frozen=True)
class NoisePlan:
    """Laplace noise applied by a local randomizer to each of its queries."""

    queries_per_client: int
    """number T of noisy reals released by each client"""
    sensitivity: float
    """sensitivity of a single query"""
    scale: float
    """Laplace scale b added to every query answer"""
    private: bool = True
    """:const:`False` for the noise-off test mode"""

    def without_noise(self) -> "NoisePlan":
        """Same plan with noise disabled, for deterministic pipeline tests."""
        return replace(self, scale=0.0, private=False)


def calibrate(budget: PrivacyBudget, T: int, sensitivity: float) -> NoisePlan:
    """Laplace scale making T composed queries (epsilon, delta)-private.

    Each query is answered with ``epsilon / sqrt(8 T ln(1/delta))``-differential
    privacy, so the scale is ``sensitivity * sqrt(8 T ln(1/delta)) / epsilon``.

    Raises:
        ValueError: on a non positive query count or sensitivity
    """
    if T < 1:
        raise ValueError(f"The number of queries must be positive, got {T}")
    if not sensitivity > 0:
        raise ValueError(f"Sensitivity must be positive, got {sensitivity}")
    if budget.replacement:
        sensitivity *= 2
    scale = sensitivity * math.sqrt(8 * T * -math.log(budget.delta)) / budget.epsilon
    return NoisePlan(queries_per_client=T, sensitivity=sensitivity, scale=scale)


def laplace_plan(
    epsilon: float, T: int, l1_sensitivity: float = 1.0, replacement: bool = False
) -> NoisePlan:
    """Plain Laplace mechanism on a T-dimensional query with the given
    l1 sensitivity: every coordinate gets ``Lap(l1_sensitivity / epsilon)``."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if T < 1:
        raise ValueError(f"The number of queries must be positive, got {T}")
    if replacement:
        l1_sensitivity *= 2
    return NoisePlan(
        queries_per_client=T,
        sensitivity=l1_sensitivity,
        scale=l1_sensitivity / epsilon,
    )


def laplace_inverse_cdf(u: Union[float, np.ndarray], b: float):
    """Map uniform draws in (0, 1) to Laplace(b) draws, 0.5 maps to 0."""
    w = np.asarray(u, dtype=np.float64) - 0.5
    x = -b * np.sign(w) * np.log1p(-2 * np.abs(w))
    return float(x) if x.ndim == 0 else x


def _open_uniform(rng: np.random.Generator, size=None):
    # rng.random() draws from [0, 1), zero is excluded so the log stays finite
    return np.maximum(rng.random(size), np.finfo(np.float64).tiny)


def laplace_sample(b: float, rng: np.random.Generator) -> float:
    """Draw one Laplace(b) variate by inverse CDF.

    Raises:
        ValueError: if the scale is not positive
    """
    if not b > 0:
        raise ValueError(f"Laplace scale must be positive, got {b}")
    return laplace_inverse_cdf(float(_open_uniform(rng)), b)


def laplace_noise(b: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vector of ``size`` independent Laplace(b) draws."""
    if not b > 0:
        raise ValueError(f"Laplace scale must be positive, got {b}")
    return laplace_inverse_cdf(_open_uniform(rng, size), b)


def laplace_sum_tail(n: int, b: float, beta: float) -> float:
    """Threshold T such that a sum of n i.i.d. Lap(b) lies in [-T, T]
    with probability at least ``1 - beta``: ``b sqrt(6n) ln(2/beta)``."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not b > 0:
        raise ValueError(f"Laplace scale must be positive, got {b}")
    if not 0 < beta < 1:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    return b * math.sqrt(6 * n) * math.log(2 / beta)


def respond_linear(
    record: ClientRecord,
    query_rows: QueryRows,
    plan: NoisePlan,
    rng: np.random.Generator,
) -> np.ndarray:
    """Answer the linear queries of ``plan`` on a single client record.

    The output only depends on the record, the query rows and ``rng``.

    Raises:
        ValueError: if the query rows do not match the plan
    """
    answers = np.asarray(query_rows(record.element), dtype=np.float64)
    if answers.shape != (plan.queries_per_client,):
        raise ValueError(
            f"Noise plan expects {plan.queries_per_client} queries, "
            f"got {answers.size} query rows"
        )
    if plan.scale == 0:
        return answers.copy()
    return answers + laplace_noise(plan.scale, plan.queries_per_client, rng)


class LocalRandomizer(Protocol):
    """A differentially private function of a single client record.

    Implementations receive one :class:`ClientRecord` and a random generator
    owned by that client, and nothing else: there is no way for them to read
    another client's data or the aggregate.
    """

    plan: NoisePlan

    def __call__(self, record: ClientRecord, rng: np.random.Generator) -> np.ndarray:
        ...


class LinearRandomizer:
    """Local randomizer answering noisy linear queries on one record."""

    def __init__(self, query_rows: QueryRows, plan: NoisePlan):
        self.query_rows = query_rows
        self.plan = plan

    def __call__(self, record: ClientRecord, rng: np.random.Generator) -> np.ndarray:
        return respond_linear(record, self.query_rows, self.plan, rng)


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode())


def derive_rng(master_seed: int, index: int, tag: str) -> np.random.Generator:
    """Independent random stream keyed by ``(master_seed, index, tag)``."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([master_seed, index, _tag_key(tag)]))
    )


def derive_seed(master_seed: int, index: int, tag: str) -> int:
    """63-bit seed keyed by ``(master_seed, index, tag)``."""
    state = np.random.SeedSequence([master_seed, index, _tag_key(tag)])
    return int(state.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


class CommunicationMeter:
    """Counts the number of reals each client sends to the aggregator."""

    def __init__(self):
        self.reals_per_client: Dict[int, int] = defaultdict(int)

    def record(self, owner: int, reals: int) -> None:
        self.reals_per_client[owner] += reals

    @property
    def per_client_message_reals(self) -> int:
        """Largest message size sent by a client, 0 if nobody sent anything."""
        return max(self.reals_per_client.values(), default=0)


def local_responses(
    records: Iterable[ClientRecord],
    randomizer: LocalRandomizer,
    master_seed: int,
    tag: str,
    meter: Optional[CommunicationMeter] = None,
) -> Iterator[np.ndarray]:
    """Yield the message of each client, computed by ``randomizer`` on that
    client's record alone with its own random stream."""
    if not randomizer.plan.private:
        logger.warning("Local randomizer '%s' runs without noise", tag)
    for record in records:
        message = randomizer(record, derive_rng(master_seed, record.owner, tag))
        if meter is not None:
            meter.record(record.owner, message.size)
        yield message


def sum_responses(
    records: Iterable[ClientRecord],
    randomizer: LocalRandomizer,
    master_seed: int,
    tag: str,
    meter: Optional[CommunicationMeter] = None,
) -> np.ndarray:
    """Aggregate of all client messages of one local round."""
    total = np.zeros(randomizer.plan.queries_per_client, dtype=np.float64)
    for message in local_responses(records, randomizer, master_seed, tag, meter):
        total += message
    return total


class ClientPool:
    """The clients of one simulation, reachable only through local rounds.

    Mechanisms get the number of clients and may run rounds of a
    :class:`LocalRandomizer` over them; the records themselves stay private to
    the pool.
    """

    def __init__(self, records: Iterable[ClientRecord]):
        self._records = list(records)

    @classmethod
    def of(cls, clients: "Clients") -> "ClientPool":
        if isinstance(clients, ClientPool):
            return clients
        return cls(clients)

    @property
    def n(self) -> int:
        return len(self._records)

    def local_round(
        self,
        randomizer: LocalRandomizer,
        master_seed: int,
        tag: str,
        meter: Optional[CommunicationMeter] = None,
    ) -> Iterator[np.ndarray]:
        return local_responses(self._records, randomizer, master_seed, tag, meter)

    def sum_round(
        self,
        randomizer: LocalRandomizer,
        master_seed: int,
        tag: str,
        meter: Optional[CommunicationMeter] = None,
    ) -> np.ndarray:
        return sum_responses(self._records, randomizer, master_seed, tag, meter)


Clients = Union[ClientPool, Iterable[ClientRecord]]
