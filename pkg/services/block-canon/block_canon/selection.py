"""
Model selection across levels of a group hierarchy.

Each level of the group map induces a block partition; fitting the block
correlation model at every level and comparing

    BIC = -2 log L + p log(nN),   AIC = -2 log L + 2p,   p = n + K(K+1)/2

(both reported divided by nN) picks the block structure. Levels whose
estimate is not a valid correlation matrix (K > N, duplicated assets) get
no likelihood and are never starred. The summary
statistics describe the implied n x n correlation matrix: each block value is
weighted by the number of asset pairs it covers, so Mean is the average
pairwise correlation over all assets.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import Singular, ZeroVariance
from .gaussian_mle import CorrelationEstimate, mle_block_correlation
from .matrix_functions import BlockCorrelation, Validity
from .panel import GroupedAssets, GroupMap, ReturnsPanel

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["Mean", "Std.", "Min", "Q10%", "Q50%", "Q90%", "Max"]
TABLE_COLUMNS = SUMMARY_COLUMNS + ["−2ℓ/(nN)", "BIC/(nN)", "K", "K(K+1)/2"]
AIC_COLUMN = "AIC/(nN)"


# ── Weighted summary statistics ──────────────────────────────


def weighted_quantile(values, weights, q: float) -> float:
    """Linear-interpolated quantile of ``values`` repeated ``weights`` times.

    Matches np.quantile(np.repeat(values, weights), q) without the repeat.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=np.int64)
    keep = weights > 0
    values, weights = values[keep], weights[keep]
    if values.size == 0:
        return float("nan")
    order = np.argsort(values, kind="stable")
    values, cum = values[order], np.cumsum(weights[order])

    h = q * (cum[-1] - 1)
    lo = int(np.floor(h))
    hi = min(lo + 1, int(cum[-1]) - 1)
    v_lo = values[np.searchsorted(cum, lo, side="right")]
    v_hi = values[np.searchsorted(cum, hi, side="right")]
    return float(v_lo + (h - lo) * (v_hi - v_lo))


def correlation_cells(C: BlockCorrelation, weighted: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Distinct block values of C and the number of asset pairs each covers.

    Unweighted, every one of the K(K+1)/2 coefficients counts once, except
    within-block values of blocks of size one, which cover no pairs.
    """
    K = C.partition.K
    n = np.asarray(C.partition.sizes, dtype=np.int64)
    iu = np.triu_indices(K)
    values = C.rho[iu]
    pairs = np.where(iu[0] == iu[1], n[iu[0]] * (n[iu[0]] - 1) // 2, n[iu[0]] * n[iu[1]])
    weights = pairs if weighted else (pairs > 0).astype(np.int64)
    return values, weights


def correlation_summary(C: BlockCorrelation, weighted: bool = True) -> dict[str, float]:
    values, weights = correlation_cells(C, weighted)
    total = weights.sum()
    if total == 0:
        return {name: float("nan") for name in SUMMARY_COLUMNS}
    mean = float(np.sum(weights * values) / total)
    std = float(np.sqrt(np.sum(weights * (values - mean) ** 2) / total))
    present = values[weights > 0]
    return {
        "Mean": mean,
        "Std.": std,
        "Min": float(present.min()),
        "Q10%": weighted_quantile(values, weights, 0.10),
        "Q50%": weighted_quantile(values, weights, 0.50),
        "Q90%": weighted_quantile(values, weights, 0.90),
        "Max": float(present.max()),
    }


# ── Per-level fits ───────────────────────────────────────────


@dataclass(frozen=True)
class ModelReport:
    level: int
    n: int
    N: int
    K: int
    neg2_loglik: float  # summed over observations, NaN when invalid
    summary: dict[str, float]
    validity: str = Validity.VALID.value

    @property
    def invalid_estimate(self) -> bool:
        return self.validity != Validity.VALID.value or not np.isfinite(self.neg2_loglik)

    @property
    def n_params(self) -> int:
        return self.n + self.K * (self.K + 1) // 2

    @property
    def scale(self) -> float:
        return float(self.n * self.N)

    @property
    def bic(self) -> float:
        return self.neg2_loglik + self.n_params * np.log(self.scale)

    @property
    def aic(self) -> float:
        return self.neg2_loglik + 2.0 * self.n_params

    def row(self, with_aic: bool = False) -> dict[str, float]:
        row = dict(self.summary)
        row["−2ℓ/(nN)"] = self.neg2_loglik / self.scale
        row["BIC/(nN)"] = self.bic / self.scale
        if with_aic:
            row[AIC_COLUMN] = self.aic / self.scale
        row["K"] = self.K
        row["K(K+1)/2"] = self.K * (self.K + 1) // 2
        return row


def fit_level(
    panel: ReturnsPanel,
    groups: GroupMap,
    level: int,
    demean: bool = False,
) -> tuple[GroupedAssets, CorrelationEstimate]:
    """Sort the panel by group label and fit the block correlation model."""
    grouped = groups.partition(panel.asset_ids, level)
    data = panel.demeaned() if demean else panel
    X = data.select(grouped.order).X
    try:
        estimate = mle_block_correlation(X, grouped.partition)
    except ZeroVariance as e:
        raise ZeroVariance(grouped.asset_ids[e.column]) from None
    return grouped, estimate


def _level_neg2_loglik(estimate: CorrelationEstimate, N: int) -> tuple[float, str]:
    status = estimate.validity.status.value
    if estimate.invalid_estimate:
        return float("nan"), status
    try:
        return N * estimate.neg2_loglik(), status
    except Singular as e:
        log.warning("Likelihood failed on a valid-looking estimate: %s", e)
        return float("nan"), Validity.BOUNDARY.value


def select_models(
    panel: ReturnsPanel,
    groups: GroupMap,
    levels: Sequence[int],
    demean: bool = False,
    weighted: bool = True,
) -> list[ModelReport]:
    reports = []
    for level in levels:
        grouped, estimate = fit_level(panel, groups, level, demean)
        total, status = _level_neg2_loglik(estimate, panel.N)
        reports.append(
            ModelReport(
                level=level,
                n=panel.n,
                N=panel.N,
                K=grouped.partition.K,
                neg2_loglik=total,
                summary=correlation_summary(estimate.correlation, weighted),
                validity=status,
            )
        )
        if np.isfinite(total):
            log.info("Level %d: K=%d, -2logL/(nN)=%.6f", level, grouped.partition.K, total / (panel.n * panel.N))
        else:
            log.warning("Level %d: K=%d, estimate is %s, excluded from selection", level, grouped.partition.K, status)
    return reports


def best_by_bic(reports: Sequence[ModelReport]) -> int | None:
    """Index of the lowest BIC among valid levels, or None if there are none.

    Ties go to the first (most parsimonious) level.
    """
    candidates = [i for i, r in enumerate(reports) if not r.invalid_estimate]
    if not candidates:
        return None
    return min(candidates, key=lambda i: reports[i].bic)


def row_label(report: ModelReport, best: bool = False) -> str:
    label = f"level {report.level}" + ("*" if best else "")
    if report.invalid_estimate:
        label += f" ({report.validity})"
    return label


def report_table(reports: Sequence[ModelReport], with_aic: bool = False) -> pd.DataFrame:
    """One row per level, labelled 'level l' and starred at the BIC minimum.

    Invalid levels keep their summary statistics, have empty criteria and
    carry their validity status in the label, e.g. 'level 2 (invalid)'.
    """
    best = best_by_bic(reports)
    index = [row_label(r, i == best) for i, r in enumerate(reports)]
    columns = TABLE_COLUMNS[:9] + ([AIC_COLUMN] if with_aic else []) + TABLE_COLUMNS[9:]
    rows = [r.row(with_aic) for r in reports]
    return pd.DataFrame(rows, index=pd.Index(index, name="model"), columns=columns)
