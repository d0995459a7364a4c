"""
Timing of canonical-form routines against the dense oracle.

Each operation is timed ``reps`` times per path and the median wall time is
kept. The canonical path starts from the block representation, the dense path
from the materialized n x n matrix; building either input is not timed.
"""

import logging
import statistics
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd

from . import dense_oracle
from .block_core import BlockPartition, CanonicalForm, decanonicalize, expand
from .errors import InputError
from .gaussian_mle import BlockCovariance, neg2_loglik, rotate_sample
from .matrix_functions import determinant, inverse

log = logging.getLogger(__name__)

OPERATIONS = ("det", "inv", "loglik")


@dataclass(frozen=True)
class BenchResult:
    op: str
    n: int
    K: int
    reps: int
    canonical_s: float
    dense_s: float

    @property
    def speedup(self) -> float:
        return self.dense_s / self.canonical_s if self.canonical_s > 0 else float("inf")


def _median_time(fn: Callable[[], object], reps: int) -> float:
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def random_covariance(partition: BlockPartition, rng: np.random.Generator) -> BlockCovariance:
    """A well-conditioned block covariance: A = G G'/K + I, lambda in [0.5, 1.5]."""
    K = partition.K
    G = rng.standard_normal((K, K))
    A = G @ G.T / K + np.eye(K)
    lambdas = rng.uniform(0.5, 1.5, size=K)
    return BlockCovariance.from_block_matrix(decanonicalize(CanonicalForm(partition, A, lambdas)))


def even_partition(n: int, K: int) -> BlockPartition:
    if not 1 <= K <= n:
        raise InputError(f"need n >= K >= 1, got n={n}, K={K}")
    return BlockPartition(tuple(len(chunk) for chunk in np.array_split(np.arange(n), K)))


def run_bench(n: int, K: int, reps: int = 5, seed: int = 0, N: int = 10) -> list[BenchResult]:
    rng = np.random.default_rng(seed)
    partition = even_partition(n, K)
    sigma = random_covariance(partition, rng)
    B = sigma.as_block_matrix()
    cf = sigma.canonical()
    dense = expand(B)
    X = rng.standard_normal((N, n))

    cases = {
        "det": (lambda: determinant(cf), lambda: dense_oracle.dense_det(dense)),
        "inv": (lambda: inverse(cf), lambda: dense_oracle.dense_inv(dense)),
        "loglik": (
            lambda: neg2_loglik(sigma, rotate_sample(X, partition)),
            lambda: dense_oracle.dense_neg2_loglik(dense, X),
        ),
    }
    results = []
    for op in OPERATIONS:
        fast, slow = cases[op]
        result = BenchResult(op, n, K, reps, _median_time(fast, reps), _median_time(slow, reps))
        log.info("%s n=%d K=%d: canonical %.2e s, dense %.2e s (x%.1f)",
                 op, n, K, result.canonical_s, result.dense_s, result.speedup)
        results.append(result)
    return results


def results_frame(results: list[BenchResult]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "op": r.op,
                "n": r.n,
                "K": r.K,
                "reps": r.reps,
                "canonical_s": r.canonical_s,
                "dense_s": r.dense_s,
                "speedup": r.speedup,
            }
            for r in results
        ]
    )
