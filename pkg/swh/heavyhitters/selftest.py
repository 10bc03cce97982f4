# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Property suites checked by ``swh heavy-hitters selftest``."""

from dataclasses import dataclass, field
import itertools
import logging
import math
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np
from scipy import stats

from swh.heavyhitters import gf2
from swh.heavyhitters.bucket_hh import BucketParams, bucket_params
from swh.heavyhitters.gf2 import BitMatrix
from swh.heavyhitters.hashing import HashRow, eval_hash, marginal_one_probability
from swh.heavyhitters.jl_hh import ProjectionSpec
from swh.heavyhitters.jl_hh import noise_plan as jl_noise_plan
from swh.heavyhitters.privacy import (
    PrivacyBudget,
    derive_rng,
    laplace_noise,
    laplace_sum_tail,
)
from swh.heavyhitters.sketch_hh import MeasurementSpec
from swh.heavyhitters.sketch_hh import noise_plan as sketch_noise_plan
from swh.heavyhitters.utils import truncation_error

logger = logging.getLogger(__name__)

KS_SAMPLES = 100_000
KS_MIN_PVALUE = 0.001
KS_MAX_STATISTIC = 0.01
TAIL_TRIALS = 1000


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, condition: bool, description: str) -> None:
        self.checks += 1
        if not condition:
            self.failures.append(description)

    def summary(self) -> str:
        """One machine readable line."""
        status = "pass" if self.passed else "fail"
        return (
            f"suite={self.name} status={status} checks={self.checks} "
            f"failures={len(self.failures)}"
        )


def _brute_force(matrix: BitMatrix, b: List[int]) -> List[int]:
    return [
        x for x in range(1 << matrix.cols) if list(matrix.multiply(x)) == list(b)
    ]


def gf2_oracle(rng: np.random.Generator, systems: int = 300) -> SuiteResult:
    """Compare the solver against exhaustive enumeration of small systems."""
    result = SuiteResult("gf2_oracle")
    for _ in range(systems):
        rows = int(rng.integers(1, 9))
        cols = int(rng.integers(1, 6))
        matrix = BitMatrix(
            rows=rows,
            cols=cols,
            bits=tuple(int(r) for r in rng.integers(0, 1 << cols, size=rows)),
        )
        b = [int(bit) for bit in rng.integers(0, 2, size=rows)]
        solutions = _brute_force(matrix, b)
        solution = gf2.solve(matrix, b)
        if not solutions:
            expected = "Infeasible"
            ok = isinstance(solution, gf2.Infeasible)
        elif len(solutions) == 1:
            expected = f"Unique({solutions[0]})"
            ok = isinstance(solution, gf2.Unique) and solution.value == solutions[0]
        else:
            expected = "Underdetermined"
            ok = isinstance(solution, gf2.Underdetermined)
        result.check(ok, f"{matrix} b={b}: expected {expected}, got {solution}")
    return result


def hash_enumeration(rng: np.random.Generator, max_bits: int = 6) -> SuiteResult:
    """Enumerate every hash parameter of small widths and check the marginals."""
    result = SuiteResult("hash_enumeration")
    for d in range(1, max_bits + 1):
        parameters = [HashRow(r=r, d=d) for r in range(1, 1 << d)]
        matrix = BitMatrix(rows=len(parameters), cols=d, bits=tuple(range(1, 1 << d)))
        for x in range(1, 1 << d):
            ones = sum(eval_hash(row, x) for row in parameters)
            result.check(
                math.isclose(ones / len(parameters), marginal_one_probability(d)),
                f"d={d} x={x}: Pr[h(x)=1]={ones / len(parameters)}",
            )
            result.check(
                list(matrix.multiply(x)) == [eval_hash(row, x) for row in parameters],
                f"d={d} x={x}: matrix product disagrees with eval_hash",
            )
        result.check(
            all(eval_hash(row, 0) == 0 for row in parameters),
            f"d={d}: h(0) must be 0",
        )
    return result


def calibration(rng: np.random.Generator) -> SuiteResult:
    """Closed form noise scales of every mechanism."""
    result = SuiteResult("calibration")
    for epsilon, delta in itertools.product((0.5, 1.0, 2.0), (1e-6, 1e-3)):
        budget = PrivacyBudget(epsilon=epsilon, delta=delta)
        log_term = -math.log(delta)
        spec = ProjectionSpec(m=64, universe_size=128, seed=0)
        result.check(
            math.isclose(
                jl_noise_plan(spec, budget).scale, math.sqrt(8 * log_term) / epsilon
            ),
            f"jl scale at epsilon={epsilon} delta={delta}",
        )
        measurement = MeasurementSpec.for_sparsity(128, 4, seed=0)
        result.check(
            math.isclose(
                sketch_noise_plan(measurement, budget).scale,
                math.sqrt(8 * measurement.m * log_term) / epsilon,
            ),
            f"sketch scale at epsilon={epsilon} delta={delta}",
        )
        params = bucket_params(64, budget, 1 / 256)
        result.check(
            math.isclose(
                params.noise_scale,
                8 * math.sqrt(params.k1 * math.log2(256) * log_term) / epsilon,
            ),
            f"bucket scale at epsilon={epsilon} delta={delta}",
        )
    example = BucketParams.build(
        d=3, k1=4, k2=2, budget=PrivacyBudget(epsilon=1.0, delta=math.exp(-1))
    )
    result.check(math.isclose(example.noise_scale, 8.0), "bucket scale example")
    return result


def laplace_statistics(
    rng: np.random.Generator, scales: Iterable[float] = (0.5, 1.0, 4.0)
) -> SuiteResult:
    """Kolmogorov-Smirnov test of the sampler against the Laplace law, and
    coverage of the tail bound of Laplace sums."""
    result = SuiteResult("laplace_statistics")
    scales = list(scales)
    for b in scales:
        samples = laplace_noise(b, KS_SAMPLES, rng)
        ks = stats.kstest(samples, "laplace", args=(0, b))
        result.check(
            ks.pvalue > KS_MIN_PVALUE, f"KS p-value {ks.pvalue:.4g} at scale {b}"
        )
        result.check(
            ks.statistic < KS_MAX_STATISTIC,
            f"KS statistic {ks.statistic:.4g} at scale {b}",
        )
        result.check(
            abs(np.var(samples) / (2 * b**2) - 1) < 0.05,
            f"variance {np.var(samples):.4g} at scale {b}",
        )
    for n, b, beta in itertools.product((10, 100, 1000), scales, (0.05, 0.2)):
        sums = laplace_noise(b, n * TAIL_TRIALS, rng).reshape(TAIL_TRIALS, n)
        threshold = laplace_sum_tail(n, b, beta)
        violations = float(np.mean(np.abs(sums.sum(axis=1)) > threshold))
        allowed = beta + 3 * math.sqrt(beta * (1 - beta) / TAIL_TRIALS)
        result.check(
            violations <= allowed,
            f"tail violations {violations:.4g} above {allowed:.4g} "
            f"at n={n} scale={b} beta={beta}",
        )
    return result


def sparse_truncation(
    rng: np.random.Generator,
    vectors: int = 100,
    sparsities: Iterable[int] = (1, 2, 5, 10),
) -> SuiteResult:
    """``||v - v_s||_2 <= ||v||_1 / sqrt(s)`` on random non-negative vectors."""
    result = SuiteResult("sparse_truncation")
    sparsities = list(sparsities)
    for _ in range(vectors):
        size = int(rng.integers(1, 200))
        v = rng.exponential(size=size) * (rng.random(size) < 0.5)
        for s in sparsities:
            error = truncation_error(v, s)
            bound = float(np.sum(v)) / math.sqrt(s)
            result.check(
                error <= bound + 1e-9,
                f"size={size} s={s}: truncation error {error:.4g} above {bound:.4g}",
            )
    return result


SUITES: Dict[str, Callable[[np.random.Generator], SuiteResult]] = {
    "gf2_oracle": gf2_oracle,
    "hash_enumeration": hash_enumeration,
    "calibration": calibration,
    "laplace_statistics": laplace_statistics,
    "sparse_truncation": sparse_truncation,
}


def run_selftest(
    names: Optional[Iterable[str]] = None, seed: int = 0
) -> List[SuiteResult]:
    """Run the named suites (all of them by default) in a fixed order."""
    names = list(SUITES) if names is None else list(names)
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ValueError(f"Unknown self-test suites: {', '.join(unknown)}")
    results = []
    for name in names:
        suite_result = SUITES[name](derive_rng(seed, 0, f"selftest-{name}"))
        for failure in suite_result.failures:
            logger.error("%s: %s", name, failure)
        results.append(suite_result)
    return results
