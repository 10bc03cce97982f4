# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Heavy hitters through noisy sparse recovery.

Clients send ``Phi v^i + z^i`` for a {-1, 0, 1} valued measurement matrix Phi;
the aggregator runs a sparse recovery decoder on the summed measurements and
reports the largest recovered entry. Independent repeats, each with an equal
share of the budget, are combined by majority vote.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from typing_extensions import Protocol

from swh.heavyhitters.core import (
    ClientRecord,
    HeavyHitterResult,
    NoCandidateError,
    UniverseIndex,
    check_index,
    majority_vote,
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

RIDGE = 1e-9
"""relative ridge added to the normal equations of the least squares refit"""


def measurement_count(universe_size: int, s: int) -> int:
    """``ceil(s log2(N/s))`` measurements for s-sparse recovery."""
    if not 1 <= s < universe_size:
        raise ValueError(f"Sparsity must be in [1, {universe_size}), got {s}")
    return max(1, ceil_int(s * math.log2(universe_size / s)))


@dataclass(frozen=True)
class MeasurementSpec:
    """Seeded measurement matrix with entries in {-1, 0, 1}.

    Each entry is non-zero with probability ``density`` and then a uniform
    sign; column ``i`` is regenerated from ``(seed, i)``.
    """

    m: int
    universe_size: int
    s: int
    seed: int
    density: float = 1.0
    oversample: int = 1
    _columns: Dict[int, np.ndarray] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self):
        if self.m != self.oversample * measurement_count(self.universe_size, self.s):
            raise ValueError(
                "Measurement count must be oversample * ceil(s log2(N / s))"
            )
        if not 0 < self.density <= 1:
            raise ValueError(f"density must be in (0, 1], got {self.density}")

    @classmethod
    def for_sparsity(
        cls,
        universe_size: int,
        s: int,
        seed: int,
        density: float = 1.0,
        oversample: int = 1,
    ) -> "MeasurementSpec":
        if oversample < 1:
            raise ValueError("oversample must be a positive integer")
        return cls(
            m=oversample * measurement_count(universe_size, s),
            universe_size=universe_size,
            s=s,
            seed=seed,
            density=density,
            oversample=oversample,
        )

    def generate_column(self, index: UniverseIndex) -> np.ndarray:
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([self.seed, index]))
        )
        signs = (rng.integers(0, 2, size=self.m) * 2 - 1).astype(np.float64)
        if self.density < 1:
            signs[rng.random(self.m) >= self.density] = 0.0
        return signs

    def column(self, index: UniverseIndex) -> np.ndarray:
        check_index(index, self.universe_size)
        if index not in self._columns:
            self._columns[index] = self.generate_column(index)
        return self._columns[index]

    def matrix(self) -> np.ndarray:
        return np.column_stack(
            [self.generate_column(i) for i in range(self.universe_size)]
        )


@dataclass(frozen=True)
class SparseEstimate:
    """Sparse vector recovered by a decoder."""

    indices: Tuple[int, ...] = ()
    values: Tuple[float, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.indices

    def argmax(self) -> Optional[UniverseIndex]:
        """Index of the largest entry, lowest index on ties."""
        if self.is_empty:
            return None
        return min(zip(self.indices, self.values), key=lambda iv: (-iv[1], iv[0]))[0]

    def value(self, index: UniverseIndex) -> float:
        return dict(zip(self.indices, self.values)).get(index, 0.0)

    def to_dense(self, universe_size: int) -> np.ndarray:
        dense = np.zeros(universe_size, dtype=np.float64)
        dense[list(self.indices)] = self.values
        return dense


class RecoveryDecoder(Protocol):
    """Deterministic sparse recovery from aggregated measurements."""

    def __call__(self, c: np.ndarray, spec: MeasurementSpec, s: int) -> SparseEstimate:
        ...


def choose_sparsity(n: int, budget: PrivacyBudget, beta: float) -> int:
    """Sparsity ``(epsilon sqrt(n / ln(1/delta)) / ln(1/beta))^(2/3)``, at least 1."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    s = (
        budget.epsilon * math.sqrt(n / -math.log(budget.delta)) / -math.log(beta)
    ) ** (2 / 3)
    return max(1, round(s))


def _least_squares(columns: np.ndarray, c: np.ndarray) -> np.ndarray:
    gram = columns.T @ columns
    ridge = RIDGE * np.trace(gram) / gram.shape[0]
    return np.linalg.solve(gram + ridge * np.eye(gram.shape[0]), columns.T @ c)


def recover_greedy(c: np.ndarray, spec: MeasurementSpec, s: int) -> SparseEstimate:
    """Greedy pursuit.

    Repeatedly selects the column most correlated with the residual (lowest
    index on ties), refits the selected support by least squares, and stops
    after ``s`` selections or once the residual norm stops decreasing.

    Raises:
        ValueError: if ``s`` exceeds the number of measurements
    """
    if s > spec.m:
        raise ValueError(f"Cannot refit {s} columns from {spec.m} measurements")
    if c.shape != (spec.m,):
        raise ValueError(f"Expected {spec.m} measurements, got {c.shape}")
    phi = spec.matrix()
    norms = np.linalg.norm(phi, axis=0)
    usable = norms > 0
    support: List[int] = []
    coefficients = np.zeros(0)
    residual = c.astype(np.float64)
    residual_norm = float(np.linalg.norm(residual))
    while len(support) < s and residual_norm > 1e-6 * max(1.0, np.linalg.norm(c)):
        correlation = np.zeros(spec.universe_size)
        correlation[usable] = np.abs(phi[:, usable].T @ residual) / norms[usable]
        correlation[support] = -1.0
        candidate = int(np.argmax(correlation))
        if correlation[candidate] <= 0:
            break
        trial_support = support + [candidate]
        trial_coefficients = _least_squares(phi[:, trial_support], c)
        trial_residual = c - phi[:, trial_support] @ trial_coefficients
        trial_norm = float(np.linalg.norm(trial_residual))
        if trial_norm >= residual_norm:
            break
        support, coefficients = trial_support, trial_coefficients
        residual, residual_norm = trial_residual, trial_norm
    order = np.argsort(support, kind="stable")
    return SparseEstimate(
        indices=tuple(int(support[i]) for i in order),
        values=tuple(float(coefficients[i]) for i in order),
    )


def noise_plan(spec: MeasurementSpec, budget: PrivacyBudget) -> NoisePlan:
    """m queries of sensitivity 1."""
    return calibrate(budget, T=spec.m, sensitivity=1.0)


def client_respond(
    record: ClientRecord,
    spec: MeasurementSpec,
    budget: PrivacyBudget,
    rng: np.random.Generator,
    noiseless: bool = False,
) -> np.ndarray:
    plan = noise_plan(spec, budget)
    if noiseless:
        plan = plan.without_noise()
    return respond_linear(record, spec.column, plan, rng)


def repeat_sparsity(
    n: int,
    universe_size: int,
    budget: PrivacyBudget,
    beta: float,
    sparsity: Optional[int] = None,
) -> int:
    """Sparsity used by every repeat, capped so that ``m >= s``."""
    s = sparsity if sparsity is not None else choose_sparsity(n, budget, beta)
    return max(1, min(s, universe_size // 2))


@dataclass
class SketchRun:
    """Sparse estimate of one repeat of a run."""

    spec: MeasurementSpec
    plan: NoisePlan
    estimate: SparseEstimate


def run_repeats(
    clients: Clients,
    universe_size: int,
    budget: PrivacyBudget,
    beta: float,
    master_seed: int,
    decoder: RecoveryDecoder = recover_greedy,
    repeats: int = 1,
    sparsity: Optional[int] = None,
    oversample: int = 1,
    density: float = 1.0,
    noiseless: bool = False,
    meter: Optional[CommunicationMeter] = None,
) -> List[SketchRun]:
    """Run ``repeats`` independent measurement rounds, each with budget
    ``(epsilon / repeats, delta / repeats)``."""
    if repeats < 1 or repeats % 2 == 0:
        raise ValueError(
            f"The number of repeats must be odd and positive, got {repeats}"
        )
    pool = ClientPool.of(clients)
    if pool.n == 0:
        raise ValueError("Cannot decode without any client response")
    repeat_budget = budget.split(repeats)
    s = repeat_sparsity(pool.n, universe_size, repeat_budget, beta, sparsity)
    runs = []
    for repeat in range(repeats):
        spec = MeasurementSpec.for_sparsity(
            universe_size,
            s,
            seed=derive_seed(master_seed, repeat, "glps-matrix"),
            density=density,
            oversample=oversample,
        )
        plan = noise_plan(spec, repeat_budget)
        if noiseless:
            plan = plan.without_noise()
        c = pool.sum_round(
            LinearRandomizer(spec.column, plan), master_seed, f"glps-{repeat}", meter
        )
        estimate = decoder(c, spec, s)
        logger.debug(
            "Sparse recovery repeat %d: s=%d, m=%d, support %s",
            repeat,
            s,
            spec.m,
            estimate.indices,
        )
        runs.append(SketchRun(spec=spec, plan=plan, estimate=estimate))
    return runs


def glps_hh(
    clients: Clients,
    universe_size: int,
    budget: PrivacyBudget,
    beta: float,
    decoder: RecoveryDecoder = recover_greedy,
    repeats: int = 1,
    master_seed: int = 0,
    sparsity: Optional[int] = None,
    oversample: int = 1,
    density: float = 1.0,
    noiseless: bool = False,
    meter: Optional[CommunicationMeter] = None,
) -> HeavyHitterResult:
    """Sparse recovery heavy hitter with majority vote amplification.

    Args:
        clients: a :class:`ClientPool` or the client records to wrap in one
        universe_size: N, the size of the universe
        budget: privacy budget of every client, split evenly over the repeats
        beta: failure probability the sparsity is chosen for
        decoder: sparse recovery algorithm run on every repeat
        repeats: odd number of independent repeats
        master_seed: seed of the public matrices and of the client streams
        sparsity: sparsity of every repeat, chosen from n when ``None``
        oversample: multiplies the number of measurements
        density: probability that a measurement entry is non-zero
        noiseless: drop the Laplace noise, for pipeline tests only
        meter: records the size of every client message

    Raises:
        ValueError: if there is no client or the number of repeats is even
        NoCandidateError: if every repeat recovered an empty estimate

    Returns:
        the element most repeats report and the mean of their estimates
    """
    runs = run_repeats(
        clients,
        universe_size,
        budget,
        beta,
        master_seed,
        decoder=decoder,
        repeats=repeats,
        sparsity=sparsity,
        oversample=oversample,
        density=density,
        noiseless=noiseless,
        meter=meter,
    )
    estimates = [run.estimate for run in runs]
    winner = majority_vote(estimate.argmax() for estimate in estimates)
    if winner is None:
        raise NoCandidateError("glps", f"all {repeats} repeats recovered nothing")
    supporting = [e.value(winner) for e in estimates if e.argmax() == winner]
    return HeavyHitterResult(index=winner, reported_count=float(np.mean(supporting)))


