# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Heavy hitter through majority buckets of parity hashes.

Every trial draws a ``k1 x d`` hash matrix H. Each client sends the noisy
parities ``H b(x) + z`` of its element; thresholding the aggregate at ``n/2``
gives the bucket holding the majority of the mass for each hash, and solving
``H x = b (mod 2)`` names the element that sits in all of them. The most
frequent candidate over ``k2`` trials wins.
"""

from dataclasses import dataclass
import enum
import logging
import math
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from swh.heavyhitters import gf2
from swh.heavyhitters.core import (
    ClientRecord,
    HeavyHitterResult,
    Histogram,
    NoCandidateError,
    UniverseIndex,
    check_index,
    heavy_hitter,
    majority_vote,
)
from swh.heavyhitters.gf2 import BitMatrix
from swh.heavyhitters.hashing import bit_length, sample_hash_matrix
from swh.heavyhitters.privacy import (
    ClientPool,
    Clients,
    CommunicationMeter,
    LinearRandomizer,
    NoisePlan,
    PrivacyBudget,
    calibrate,
    derive_rng,
    laplace_noise,
    respond_linear,
)
from swh.heavyhitters.utils import ceil_int

logger = logging.getLogger(__name__)

K1_RULES = ("exact-recovery", "unique-wins")
"""``exact-recovery``: k1 = ceil(log2(12N))

``unique-wins``: k1 = ceil(log2(3N/beta))
"""


@dataclass(frozen=True)
class BucketParams:
    """Shape and noise of the bucket mechanism."""

    k1: int
    """hashes per trial"""
    k2: int
    """number of trials"""
    d: int
    """bit length of universe elements"""
    noise_scale: float
    """Laplace scale added to every parity"""

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1 or self.d < 1:
            raise ValueError("k1, k2 and d must all be positive")

    @classmethod
    def build(
        cls, d: int, k1: int, k2: int, budget: PrivacyBudget
    ) -> "BucketParams":
        """Params with the scale calibrated for ``k1 * k2`` parity queries."""
        plan = calibrate(budget, T=k1 * k2, sensitivity=1.0)
        return cls(k1=k1, k2=k2, d=d, noise_scale=plan.scale)

    @property
    def queries_per_client(self) -> int:
        return self.k1 * self.k2


def choose_k1(universe_size: int, beta: float, k1_rule: str = "exact-recovery") -> int:
    """
    >>> choose_k1(8, 0.1)
    7
    """
    if k1_rule == "exact-recovery":
        return (12 * universe_size - 1).bit_length()
    if k1_rule == "unique-wins":
        return ceil_int(math.log2(3 * universe_size / beta))
    raise ValueError(f"Unknown k1 rule '{k1_rule}', expected one of {K1_RULES}")


def choose_k2(beta: float) -> int:
    if not 0 < beta < 1:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    return ceil_int(8 * math.log2(1 / beta))


def bucket_params(
    universe_size: int,
    budget: PrivacyBudget,
    beta: float,
    k1_rule: str = "exact-recovery",
) -> BucketParams:
    if universe_size < 2:
        raise ValueError(f"Universe size must be at least 2, got {universe_size}")
    return BucketParams.build(
        d=bit_length(universe_size),
        k1=choose_k1(universe_size, beta, k1_rule),
        k2=choose_k2(beta),
        budget=budget,
    )


class TrialReason(enum.Enum):
    DECODED = "Decoded"
    INFEASIBLE = "Infeasible"
    UNDERDETERMINED = "Underdetermined"
    OUT_OF_RANGE = "OutOfRange"


@dataclass(frozen=True)
class TrialOutcome:
    """Result of decoding a single trial."""

    reason: TrialReason
    candidate: Optional[UniverseIndex] = None
    """decoded element, only set when the trial decoded one in range"""


def _parities(matrix: BitMatrix, element: int) -> np.ndarray:
    return np.array(matrix.multiply(element), dtype=np.float64)


def trial_plan(params: BucketParams, noiseless: bool = False) -> NoisePlan:
    """Noise of a single trial, ``k1`` parities at the calibrated scale."""
    scale = 0.0 if noiseless else params.noise_scale
    return NoisePlan(
        queries_per_client=params.k1,
        sensitivity=1.0,
        scale=scale,
        private=not noiseless,
    )


def client_respond(
    record: ClientRecord,
    matrix: BitMatrix,
    params: BucketParams,
    rng: np.random.Generator,
    noiseless: bool = False,
) -> np.ndarray:
    """Noisy parities of one client for one trial.

    Raises:
        ValueError: if the element does not fit in ``d`` bits
    """
    if not 0 <= record.element < (1 << params.d):
        raise ValueError(f"Element {record.element} does not fit in {params.d} bits")
    plan = trial_plan(params, noiseless)
    return respond_linear(
        record, lambda element: _parities(matrix, element), plan, rng
    )


def majority_bits(u: Sequence[float], n: int) -> List[int]:
    """Bit k is set when bucket 1 of hash k holds more than half of the mass."""
    return [1 if u_k > n / 2 else 0 for u_k in u]


def trial_decode(
    u: Sequence[float], n: int, matrix: BitMatrix, universe_size: int
) -> TrialOutcome:
    """Decode the element lying in every majority bucket of a trial.

    Raises:
        ValueError: if ``u`` does not have one entry per hash
    """
    if len(u) != matrix.rows:
        raise ValueError(f"Expected {matrix.rows} noisy parities, got {len(u)}")
    solution = gf2.solve(matrix, majority_bits(u, n))
    if isinstance(solution, gf2.Infeasible):
        return TrialOutcome(reason=TrialReason.INFEASIBLE)
    if isinstance(solution, gf2.Underdetermined):
        return TrialOutcome(reason=TrialReason.UNDERDETERMINED)
    if solution.value >= universe_size:
        return TrialOutcome(reason=TrialReason.OUT_OF_RANGE)
    return TrialOutcome(reason=TrialReason.DECODED, candidate=solution.value)


def sample_trial_matrices(params: BucketParams, master_seed: int) -> List[BitMatrix]:
    """The public hash matrices of all ``k2`` trials."""
    return [
        sample_hash_matrix(
            params.d, params.k1, derive_rng(master_seed, trial, "bucket-matrix")
        )
        for trial in range(params.k2)
    ]


class BucketRandomizer(LinearRandomizer):
    """Answers the parities of every trial at once, ``k1 * k2`` reals per client.

    Each client checks that its own element lies in the universe before
    answering.
    """

    def __init__(
        self, matrices: Sequence[BitMatrix], plan: NoisePlan, universe_size: int
    ):
        self.matrices = list(matrices)
        self.universe_size = universe_size
        self._signatures: Dict[int, np.ndarray] = {}
        super().__init__(self.signature, plan)

    def signature(self, element: int) -> np.ndarray:
        if element not in self._signatures:
            check_index(element, self.universe_size)
            self._signatures[element] = np.concatenate(
                [_parities(matrix, element) for matrix in self.matrices]
            )
        return self._signatures[element]


def _majority_mass(u: np.ndarray, n: int) -> float:
    bits = np.array(majority_bits(u, n))
    return float(np.min(np.where(bits == 1, u, n - u)))


def bucket_hh(
    clients: Clients,
    universe_size: int,
    budget: PrivacyBudget,
    beta: float,
    master_seed: int = 0,
    k1_rule: str = "exact-recovery",
    noiseless: bool = False,
    meter: Optional[CommunicationMeter] = None,
) -> HeavyHitterResult:
    """Plurality vote over the decoded candidates of ``k2`` trials.

    The reported count is the mean, over the winning trials, of the smallest
    majority bucket mass of the trial.

    Args:
        clients: a :class:`ClientPool` or the client records to wrap in one
        universe_size: N, every element must lie in ``[0, N)``
        budget: privacy budget of every client over all ``k2`` trials
        beta: failure probability, sets the number of trials
        master_seed: seed of the public hash matrices and of the client streams
        k1_rule: rule choosing the number of hashes per trial, one of
            :data:`K1_RULES`
        noiseless: drop the Laplace noise, for pipeline tests only
        meter: records the size of every client message

    Raises:
        ValueError: if there is no client, or a client element is outside the
            universe
        NoCandidateError: if no trial decoded a candidate

    Returns:
        the winning candidate and its estimated count
    """
    pool = ClientPool.of(clients)
    if pool.n == 0:
        raise ValueError("Cannot decode without any client response")
    n = pool.n
    params = bucket_params(universe_size, budget, beta, k1_rule)
    matrices = sample_trial_matrices(params, master_seed)
    plan = calibrate(budget, T=params.queries_per_client, sensitivity=1.0)
    if noiseless:
        plan = plan.without_noise()
    total = pool.sum_round(
        BucketRandomizer(matrices, plan, universe_size), master_seed, "bucket", meter
    )
    trial_sums = total.reshape(params.k2, params.k1)
    outcomes = []
    for trial, (u, matrix) in enumerate(zip(trial_sums, matrices)):
        outcome = trial_decode(u, n, matrix, universe_size)
        logger.debug(
            "Bucket trial %d: %s %s", trial, outcome.reason.value, outcome.candidate
        )
        outcomes.append(outcome)
    winner = majority_vote(outcome.candidate for outcome in outcomes)
    if winner is None:
        reasons = sorted({outcome.reason.value for outcome in outcomes})
        raise NoCandidateError(
            "bucket", f"none of the {params.k2} trials decoded ({', '.join(reasons)})"
        )
    masses = [
        _majority_mass(u, n)
        for u, outcome in zip(trial_sums, outcomes)
        if outcome.candidate == winner
    ]
    return HeavyHitterResult(index=winner, reported_count=float(np.mean(masses)))


class Condition(NamedTuple):
    satisfied: bool
    lhs: float
    """count v1 of the heavy hitter"""
    rhs: float


def condition_check(
    histogram: Histogram, params: BucketParams, budget: PrivacyBudget, beta: float
) -> Condition:
    """Sufficient condition for exact recovery of the heavy hitter.

    ``v1 >= 8 sqrt(2 c k1) + 8 ln(24 k1) sqrt(6 n k1 L ln(1/delta)) / epsilon``
    with ``L = log2(1/beta)`` and ``c`` the sum of the squared counts of all
    elements but the largest one.
    """
    counts = histogram.sorted_counts().astype(np.float64)
    v1 = float(counts[0])
    c = float(np.sum(counts[1:] ** 2))
    n = histogram.n
    k1 = params.k1
    rhs = 8 * math.sqrt(2 * c * k1) + 8 * math.log(24 * k1) * math.sqrt(
        6 * n * k1 * math.log2(1 / beta) * -math.log(budget.delta)
    ) / budget.epsilon
    return Condition(satisfied=v1 >= rhs, lhs=v1, rhs=rhs)


def _bucket_one_mass(histogram: Histogram, matrix: BitMatrix) -> np.ndarray:
    mass = np.zeros(matrix.rows, dtype=np.float64)
    for element, count in histogram.items():
        mass += count * _parities(matrix, element)
    return mass


def heavy_wins_fraction(
    histogram: Histogram,
    params: BucketParams,
    trials: int,
    rng: np.random.Generator,
    noiseless: bool = False,
) -> float:
    """Fraction of simulated trials where the heavy hitter lies in the
    majority bucket of every hash.

    Each simulated trial adds the sum of ``n`` Laplace draws per hash to the
    exact bucket masses of ``histogram``.
    """
    heavy, _ = heavy_hitter(histogram)
    n = histogram.n
    wins = 0
    for _ in range(trials):
        matrix = sample_hash_matrix(params.d, params.k1, rng)
        u = _bucket_one_mass(histogram, matrix)
        if not noiseless:
            u += laplace_noise(params.noise_scale, n * params.k1, rng).reshape(
                params.k1, n
            ).sum(axis=1)
        if majority_bits(u, n) == list(matrix.multiply(heavy)):
            wins += 1
    return wins / trials


def unique_wins_fraction(
    histogram: Histogram,
    params: BucketParams,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Fraction of sampled hash matrices under which no other occupied element
    shares the full parity signature of the heavy hitter."""
    heavy, _ = heavy_hitter(histogram)
    others = [element for element, _ in histogram.items() if element != heavy]
    wins = 0
    for _ in range(trials):
        matrix = sample_hash_matrix(params.d, params.k1, rng)
        signature = matrix.multiply(heavy)
        if all(matrix.multiply(other) != signature for other in others):
            wins += 1
    return wins / trials
