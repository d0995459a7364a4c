"""
Synthetic panels with a known nested block correlation.

Labels are nested ("03.01" lies in group "03"), and the true correlation is

    C = sum_l w_l * [assets share their level-l prefix] + (1 - sum_l w_l) I

a positive combination of group indicator matrices plus a ridge, so it is
positive definite whenever the weights are non-negative and sum below one.
Draws happen in rotated coordinates (y_0 ~ N(0, A), y_k ~ N(0, lambda_k I))
and are rotated back, O(nN) per panel.

LEARNING (Python):
  numpy.random.default_rng(seed) gives an independent, reproducible stream.
  Passing the Generator around (instead of seeding a global) keeps every
  function deterministic given its inputs.
"""

import logging
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np
import pandas as pd

from .block_core import BlockPartition, rotate_back
from .errors import InputError
from .matrix_functions import BlockCorrelation
from .panel import GroupMap, ReturnsPanel

log = logging.getLogger(__name__)

FIRST_DATE = "2008-01-02"


def nested_labels(branching: Sequence[int], leaf_size: int) -> list[str]:
    """Dotted labels for a full tree: branching (4, 3) and leaf_size 5 give 60 assets."""
    if not branching or min(branching) < 1 or leaf_size < 1:
        raise InputError("branching factors and leaf size must be >= 1")
    labels = []
    for path in product(*(range(1, b + 1) for b in branching)):
        labels.extend([".".join(f"{p:02d}" for p in path)] * leaf_size)
    return labels


def _prefix(label: str, level: int) -> str:
    return ".".join(label.split(".")[:level])


def nested_correlation(labels: Sequence[str], weights: Sequence[float]) -> BlockCorrelation:
    """Block correlation on the level-(len(weights) - 1) partition of sorted labels.

    weights[l] is added to the correlation of every pair sharing its level-l
    prefix; weights[0] applies to all pairs.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.size == 0 or np.any(weights < 0) or weights.sum() >= 1.0:
        raise InputError("weights must be non-negative with sum < 1")
    depth = weights.size - 1
    level_labels = [_prefix(label, depth) for label in labels]
    partition = BlockPartition.from_labels(level_labels)
    blocks = [level_labels[s] for s in partition.offsets]

    K = partition.K
    rho = np.zeros((K, K))
    for level, w in enumerate(weights):
        prefixes = np.array([_prefix(b, level) for b in blocks])
        rho += w * (prefixes[:, None] == prefixes[None, :])
    return BlockCorrelation(partition, rho)


def sample_standardized(C: BlockCorrelation, N: int, rng: np.random.Generator) -> np.ndarray:
    """N draws from N(0, C) as an N x n matrix."""
    cf = C.canonical()
    partition = C.partition
    L = np.linalg.cholesky(cf.A)
    Y = np.empty((partition.n, N))
    Y[: partition.K] = L @ rng.standard_normal((partition.K, N))
    for k in np.flatnonzero(partition.active):
        rows = partition.contrast_slice(k)
        Y[rows] = np.sqrt(cf.lambdas[k]) * rng.standard_normal((partition.sizes[k] - 1, N))
    return rotate_back(Y, partition).T


@dataclass(frozen=True)
class SimulatedPanel:
    panel: ReturnsPanel
    groups: GroupMap
    truth: BlockCorrelation
    level: int
    variances: np.ndarray


def simulate_panel(
    branching: Sequence[int],
    leaf_size: int,
    weights: Sequence[float],
    N: int,
    seed: int = 0,
    vol_range: tuple[float, float] = (0.01, 0.03),
    shuffle: bool = True,
) -> SimulatedPanel:
    """Panel of N dates whose correlation is nested_correlation(labels, weights).

    Columns are shuffled unless ``shuffle`` is False, so consumers have to
    sort by label themselves; ``truth`` is in label order.
    """
    if N < 1:
        raise InputError("need N >= 1")
    rng = np.random.default_rng(seed)
    labels = nested_labels(branching, leaf_size)
    truth = nested_correlation(labels, weights)
    n = len(labels)

    vols = rng.uniform(*vol_range, size=n)
    X = sample_standardized(truth, N, rng) * vols
    asset_ids = [f"A{i:05d}" for i in range(n)]
    order = rng.permutation(n) if shuffle else np.arange(n)

    dates = pd.bdate_range(FIRST_DATE, periods=N).strftime("%Y-%m-%d")
    panel = ReturnsPanel(tuple(asset_ids[i] for i in order), tuple(dates), X[:, order])
    groups = GroupMap(dict(zip(asset_ids, labels)))
    log.info("Simulated %d dates x %d assets, true K=%d (seed %d)", N, n, truth.partition.K, seed)
    return SimulatedPanel(panel, groups, truth, len(weights) - 1, vols * vols)
