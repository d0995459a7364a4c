"""
Gaussian likelihood, closed-form MLEs and scores for block covariance models.

With Y = Q'X the log-likelihood of N(0, Sigma), Sigma = Q D Q', splits into a
K-dimensional Gaussian for the block means y_0 ~ N(0, A) plus independent
N(0, lambda_k I) contrasts y_k. The sufficient statistics are therefore

    S0  = (1/N) sum_s y_0s y_0s'            (K x K)
    q_k = (1/(N (n_k - 1))) sum_s y_ks'y_ks  (one scalar per block)

and every routine below runs on them: O(nN) to rotate the data once, then
O(K^3) per likelihood evaluation.

Data are treated as mean zero. Variances use the 1/N convention.

LEARNING (Python):
  scipy.linalg.cho_factor/cho_solve give a Cholesky factorization once and
  reuse it for both log det A (twice the sum of log diag L) and A^-1 S0.
  It raises LinAlgError for a non-PD matrix, which doubles as the SPD check.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .block_core import (
    BlockMatrix,
    BlockPartition,
    CanonicalForm,
    Rotation,
    canonicalize,
    decanonicalize,
    expand,
)
from .config import ASYM_TOL, PD_RTOL
from .errors import DimensionMismatch, NotSPD, StructureViolation, ZeroVariance
from .matrix_functions import BlockCorrelation, Validity, ValidityReport, is_valid_correlation

log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


# ── Rotated sample ───────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class RotatedSample:
    """Sufficient statistics (S0, q) of a rotated sample, optionally with Y.

    q[k] is NaN for blocks of size one. Y, when kept, is n x N with one
    rotated observation per column.
    """

    partition: BlockPartition
    N: int
    S0: np.ndarray
    q: np.ndarray
    Y: np.ndarray | None = field(default=None, repr=False)

    def observation(self, s: int) -> np.ndarray:
        if self.Y is None:
            raise ValueError("rotated observations were not kept (use keep_rotated=True)")
        return self.Y[:, s]


def rotate_sample(
    X,
    partition: BlockPartition,
    keep_rotated: bool = False,
    rotation: Rotation | None = None,
) -> RotatedSample:
    """Rotate an N x n sample and accumulate S0 and q in observation order."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != partition.n:
        raise DimensionMismatch(f"data has shape {X.shape}, partition needs {partition.n} columns")
    N = X.shape[0]
    if N == 0:
        raise DimensionMismatch("need at least one observation")

    Y = (rotation or Rotation(partition)).apply(X.T)
    K = partition.K
    S0 = Y[:K] @ Y[:K].T / N
    q = np.full(K, np.nan)
    for k in np.flatnonzero(partition.active):
        contrasts = Y[partition.contrast_slice(k)]
        q[k] = float(np.sum(contrasts * contrasts)) / (N * (partition.sizes[k] - 1))

    log.debug("Rotated %d observations of %d assets into %d blocks", N, partition.n, K)
    return RotatedSample(partition, N, (S0 + S0.T) / 2.0, q, Y if keep_rotated else None)


# ── Block covariance ─────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class BlockCovariance:
    """Block variances sigma2, within-block covariances and a K x K between grid.

    sigma_between is stored as a full symmetric K x K matrix; its diagonal is
    ignored. For blocks of size one sigma_within is 0.
    """

    partition: BlockPartition
    sigma2: np.ndarray
    sigma_within: np.ndarray
    sigma_between: np.ndarray

    def __post_init__(self):
        K = self.partition.K
        between = np.array(self.sigma_between, dtype=float)
        if between.shape != (K, K):
            raise DimensionMismatch(f"sigma_between has shape {between.shape} for K={K}")
        if np.max(np.abs(between - between.T)) > ASYM_TOL:
            raise StructureViolation("sigma_between must be symmetric")
        between = (between + between.T) / 2.0
        np.fill_diagonal(between, 0.0)
        within = np.where(self.partition.active, np.asarray(self.sigma_within, dtype=float), 0.0)
        sigma2 = np.array(self.sigma2, dtype=float).reshape(-1)
        if sigma2.shape != (K,) or within.shape != (K,):
            raise DimensionMismatch(f"sigma2 and sigma_within need {K} entries")
        for name, value in (("sigma2", sigma2), ("sigma_within", within), ("sigma_between", between)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def from_block_matrix(cls, B: BlockMatrix) -> "BlockCovariance":
        return cls(B.partition, B.diag_values, np.diag(B.block_values), B.block_values)

    @classmethod
    def from_canonical(cls, cf: CanonicalForm) -> "BlockCovariance":
        return cls.from_block_matrix(decanonicalize(cf))

    def as_block_matrix(self) -> BlockMatrix:
        b = np.array(self.sigma_between)
        np.fill_diagonal(b, self.sigma_within)
        return BlockMatrix(self.partition, self.sigma2, b)

    def canonical(self) -> CanonicalForm:
        return canonicalize(self.as_block_matrix())

    def expand(self) -> np.ndarray:
        return expand(self.as_block_matrix())


def _check_sample(partition: BlockPartition, sample: RotatedSample) -> None:
    if sample.partition.sizes != partition.sizes:
        raise DimensionMismatch(
            f"sample partition {sample.partition.sizes} differs from {partition.sizes}"
        )


def _cholesky(cf: CanonicalForm):
    try:
        factor = scipy.linalg.cho_factor(cf.A, lower=True)
    except np.linalg.LinAlgError as e:
        raise NotSPD(f"A is not positive definite: {e}") from e
    bad = np.flatnonzero(cf.partition.active & (cf.lambdas <= 0))
    if bad.size:
        raise NotSPD(f"lambda <= 0 in blocks {bad.tolist()}")
    return factor


def neg2_loglik_canonical(cf: CanonicalForm, sample: RotatedSample) -> float:
    """Average -2 log-likelihood per observation under N(0, Q D Q')."""
    _check_sample(cf.partition, sample)
    factor = _cholesky(cf)
    log_det_A = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    trace = float(np.trace(scipy.linalg.cho_solve(factor, sample.S0)))

    active = cf.partition.active
    mult = cf.partition.size_array[active] - 1.0
    lam = cf.lambdas[active]
    contrasts = float(np.sum(mult * (np.log(lam) + sample.q[active] / lam)))
    return cf.partition.n * LOG_2PI + log_det_A + trace + contrasts


def neg2_loglik(sigma: BlockCovariance, sample: RotatedSample) -> float:
    return neg2_loglik_canonical(sigma.canonical(), sample)


# ── Block covariance MLE ─────────────────────────────────────


@dataclass(frozen=True)
class CovarianceEstimate:
    covariance: BlockCovariance
    canonical: CanonicalForm
    degenerate: bool


def mle_block_covariance(sample: RotatedSample, pd_rtol: float = PD_RTOL) -> CovarianceEstimate:
    """A_hat = S0, lambda_hat = q; Sigma_hat recovered from (A_hat, lambda_hat).

    The estimate is flagged degenerate (not raised) when S0 is not positive
    definite or a contrast variance is zero, e.g. N < K.
    """
    partition = sample.partition
    lambdas = np.where(partition.active, sample.q, 0.0)
    cf = CanonicalForm(partition, sample.S0, lambdas)

    scale = max(1.0, float(np.max(np.abs(sample.S0))))
    min_eig = float(np.linalg.eigvalsh(sample.S0)[0])
    degenerate = min_eig <= pd_rtol * scale or bool(np.any(cf.active_lambdas <= 0))
    if degenerate:
        log.warning(
            "Degenerate covariance estimate: N=%d, K=%d, min eig S0 %.3e",
            sample.N, partition.K, min_eig,
        )
    return CovarianceEstimate(BlockCovariance.from_canonical(cf), cf, degenerate)


# ── Block correlation MLE ────────────────────────────────────


@dataclass(frozen=True, eq=False)
class CorrelationEstimate:
    """Variances, block correlation and the A-matrix of the standardized data.

    lambda_tilde is implied by the unit diagonal, (n_k - a_kk)/(n_k - 1);
    lambda_contrast is the contrast-based q of the standardized sample. Both
    are NaN for blocks of size one.
    """

    variances: np.ndarray
    correlation: BlockCorrelation
    a_tilde: np.ndarray
    lambda_tilde: np.ndarray
    lambda_contrast: np.ndarray
    validity: ValidityReport
    sample: RotatedSample

    @property
    def invalid_estimate(self) -> bool:
        return self.validity.status is not Validity.VALID

    @property
    def lambda_discrepancy(self) -> np.ndarray:
        return self.lambda_contrast - self.lambda_tilde

    def neg2_loglik(self) -> float:
        return neg2_loglik_correlation(self.variances, self.correlation, self.sample)


def mle_block_correlation(
    X,
    partition: BlockPartition,
    keep_rotated: bool = False,
    pd_rtol: float = PD_RTOL,
) -> CorrelationEstimate:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != partition.n:
        raise DimensionMismatch(f"data has shape {X.shape}, partition needs {partition.n} columns")
    variances = np.mean(X * X, axis=0)
    zero = np.flatnonzero(variances <= 0)
    if zero.size:
        raise ZeroVariance(int(zero[0]))

    sample = rotate_sample(X / np.sqrt(variances), partition, keep_rotated=keep_rotated)
    A = sample.S0
    n = partition.size_array
    active = partition.active
    a_diag = np.diag(A)

    rho = A / np.sqrt(np.outer(n, n))
    within = np.full(partition.K, 0.0)
    within[active] = (a_diag[active] - 1.0) / (n[active] - 1.0)
    np.fill_diagonal(rho, within)
    correlation = BlockCorrelation(partition, rho)

    lambda_tilde = np.full(partition.K, np.nan)
    lambda_tilde[active] = (n[active] - a_diag[active]) / (n[active] - 1.0)

    validity = is_valid_correlation(correlation, pd_rtol)
    if not validity.is_valid:
        log.warning(
            "Correlation estimate is %s (min eig A %.3e, blocks %s)",
            validity.status.value, validity.min_eig_A, list(validity.offending_blocks),
        )
    log.info("Estimated block correlation: n=%d K=%d N=%d", partition.n, partition.K, sample.N)
    return CorrelationEstimate(
        variances, correlation, A, lambda_tilde, sample.q.copy(), validity, sample
    )


def neg2_loglik_correlation(
    variances,
    C: BlockCorrelation,
    standardized: RotatedSample,
) -> float:
    """Per-observation -2 log-likelihood of Sigma = diag(sigma) C diag(sigma).

    ``standardized`` is the rotated sample of X / sigma.
    """
    variances = np.asarray(variances, dtype=float)
    if variances.shape != (C.partition.n,):
        raise DimensionMismatch(f"need {C.partition.n} variances, got {variances.shape}")
    return neg2_loglik_canonical(C.canonical(), standardized) + float(np.sum(np.log(variances)))


# ── Scores ───────────────────────────────────────────────────


@dataclass(frozen=True)
class ScoreVector:
    """Partials of -2 log L. d_sigma_between follows np.triu_indices(K, 1)."""

    dA: np.ndarray
    d_sigma2: np.ndarray
    d_sigma_within: np.ndarray
    d_sigma_between: np.ndarray
    d_lambda: np.ndarray


def _assemble_score(partition: BlockPartition, M: np.ndarray, d_lambda: np.ndarray) -> ScoreVector:
    n = partition.size_array
    m_diag = np.diag(M)
    d_sigma2 = m_diag + d_lambda
    d_sigma_within = np.where(partition.active, (n - 1.0) * m_diag - d_lambda, 0.0)
    iu = np.triu_indices(partition.K, 1)
    d_between = 2.0 * np.sqrt(n[iu[0]] * n[iu[1]]) * M[iu]
    return ScoreVector(M, d_sigma2, d_sigma_within, d_between, d_lambda)


def score(sigma: BlockCovariance, y) -> ScoreVector:
    """Score of one rotated observation y = Q'x."""
    cf = sigma.canonical()
    partition = cf.partition
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (partition.n,):
        raise DimensionMismatch(f"rotated observation needs {partition.n} entries")
    factor = _cholesky(cf)
    A_inv = scipy.linalg.cho_solve(factor, np.eye(partition.K))
    u = A_inv @ y[: partition.K]
    M = A_inv - np.outer(u, u)

    d_lambda = np.zeros(partition.K)
    for k in np.flatnonzero(partition.active):
        yk = y[partition.contrast_slice(k)]
        lam = cf.lambdas[k]
        d_lambda[k] = (partition.sizes[k] - 1) / lam - float(yk @ yk) / lam**2
    return _assemble_score(partition, M, d_lambda)


def sample_score(sigma: BlockCovariance, sample: RotatedSample) -> ScoreVector:
    """Score summed over the sample, from (S0, q) alone."""
    cf = sigma.canonical()
    partition = cf.partition
    _check_sample(partition, sample)
    factor = _cholesky(cf)
    A_inv = scipy.linalg.cho_solve(factor, np.eye(partition.K))
    M = sample.N * (A_inv - A_inv @ sample.S0 @ A_inv)

    active = partition.active
    lam = cf.lambdas[active]
    d_lambda = np.zeros(partition.K)
    d_lambda[active] = (
        sample.N * (partition.size_array[active] - 1.0) * (1.0 / lam - sample.q[active] / lam**2)
    )
    return _assemble_score(partition, (M + M.T) / 2.0, d_lambda)
