"""
Dense O(n^3) reference implementations, used as ground truth by tests and bench.

Nothing here looks at block structure. Keep it that way: the fast paths are
checked against these functions, so they must not share code with them.
Not exported from the package namespace.
"""

import numpy as np
import scipy.linalg

from .block_core import BlockPartition, CanonicalForm
from .errors import NotSPD, Singular

LOG_2PI = float(np.log(2.0 * np.pi))


def _square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return M


def dense_det(M) -> float:
    """Partial-pivot LU: product of U's diagonal times the permutation sign."""
    M = _square(M)
    lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    swaps = np.count_nonzero(piv != np.arange(piv.size))
    return float((-1.0) ** swaps * np.prod(np.diag(lu)))


def dense_inv(M) -> np.ndarray:
    M = _square(M)
    lu, piv = scipy.linalg.lu_factor(M)
    if np.any(np.diag(lu) == 0):
        raise Singular("matrix is singular")
    return scipy.linalg.lu_solve((lu, piv), np.eye(M.shape[0]))


def dense_eig_sym(M) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix."""
    return np.linalg.eigvalsh(_square(M))


def dense_exp(M) -> np.ndarray:
    return scipy.linalg.expm(_square(M))


def dense_log_spd(M) -> np.ndarray:
    M = _square(M)
    w, V = np.linalg.eigh((M + M.T) / 2.0)
    if w[0] <= 0:
        raise NotSPD(f"matrix is not positive definite (min eigenvalue {w[0]:.3e})")
    return (V * np.log(w)) @ V.T


def dense_matrix_power(M, q: int) -> np.ndarray:
    M = _square(M)
    if q < 0:
        return np.linalg.matrix_power(dense_inv(M), -q)
    return np.linalg.matrix_power(M, q)


def dense_neg2_loglik(Sigma, X) -> float:
    """Average over rows of X of -2 log N(x; 0, Sigma)."""
    Sigma = _square(Sigma)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as e:
        raise NotSPD(str(e)) from e
    Z = scipy.linalg.solve_triangular(L, X.T, lower=True)
    log_det = 2.0 * np.sum(np.log(np.diag(L)))
    return float(Sigma.shape[0] * LOG_2PI + log_det + np.mean(np.sum(Z * Z, axis=0)))


def materialize_Q(partition: BlockPartition) -> np.ndarray:
    """Dense Q: block-mean vectors first, then each block's Helmert complement."""
    n, K = partition.n, partition.K
    Q = np.zeros((n, n))
    col = K
    start = 0
    for k, m in enumerate(partition.sizes):
        H = scipy.linalg.helmert(m, full=True)
        Q[start : start + m, k] = H[0]
        Q[start : start + m, col : col + m - 1] = H[1:].T
        col += m - 1
        start += m
    return Q


def materialize_D(cf: CanonicalForm) -> np.ndarray:
    """Dense D = diag(A, lambda_1 I, ..., lambda_K I)."""
    K = cf.partition.K
    tail = np.repeat(cf.lambdas, np.asarray(cf.partition.sizes) - 1)
    D = np.zeros((K + tail.size, K + tail.size))
    D[:K, :K] = cf.A
    D[K:, K:] = np.diag(tail)
    return D
