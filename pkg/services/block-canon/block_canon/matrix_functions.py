"""
Matrix functions of block matrices, computed on the canonical form.

For B = Q D Q' and any matrix function h that is well defined on D,
h(B) = Q h(D) Q', and h(D) = diag(h(A), h(lambda_k) I). Every function below
therefore touches a K x K matrix and K scalars, and returns a CanonicalForm
on the same partition: the result is again a block matrix.

Only real logarithms are supported. mlog needs a symmetric positive definite
A and positive lambdas; anything else raises NotRealLoggable.
"""

import enum
import logging
import operator
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .block_core import (
    BlockMatrix,
    BlockPartition,
    CanonicalForm,
    canonicalize,
    decanonicalize,
    expand,
)
from .config import ASYM_TOL, PD_RTOL
from .errors import (
    Degenerate,
    DimensionMismatch,
    NotRealLoggable,
    Singular,
    StructureViolation,
    UnequalBlocks,
)

log = logging.getLogger(__name__)


# ── Block correlation matrices ───────────────────────────────


@dataclass(frozen=True, eq=False)
class BlockCorrelation:
    """Block matrix with unit diagonal: rho_ii within, rho_ij between blocks."""

    partition: BlockPartition
    rho: np.ndarray

    def __post_init__(self):
        K = self.partition.K
        rho = np.array(self.rho, dtype=float)
        if rho.shape != (K, K):
            raise DimensionMismatch(f"rho has shape {rho.shape} for K={K}")
        if np.max(np.abs(rho - rho.T)) > ASYM_TOL:
            raise StructureViolation("rho must be symmetric")
        if np.max(np.abs(rho)) > 1.0 + 1e-12:
            raise StructureViolation("correlations must lie in [-1, 1]")
        rho = np.clip((rho + rho.T) / 2.0, -1.0, 1.0)
        single = ~self.partition.active
        rho[single, single] = 0.0
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_block_matrix(cls, B: BlockMatrix, tol: float = 1e-12) -> "BlockCorrelation":
        if np.max(np.abs(B.diag_values - 1.0)) > tol:
            raise StructureViolation("a correlation matrix needs d_i = 1 on every block")
        return cls(B.partition, B.block_values)

    def as_block_matrix(self) -> BlockMatrix:
        return BlockMatrix(self.partition, np.ones(self.partition.K), self.rho)

    def canonical(self) -> CanonicalForm:
        return canonicalize(self.as_block_matrix())

    def expand(self) -> np.ndarray:
        return expand(self.as_block_matrix())


@dataclass(frozen=True, eq=False)
class CorrelationParam:
    """Lower triangle (with diagonal) of the unique elements of log C."""

    partition: BlockPartition
    gamma: np.ndarray

    def __post_init__(self):
        K = self.partition.K
        gamma = np.array(self.gamma, dtype=float).reshape(-1)
        if gamma.size != K * (K + 1) // 2:
            raise DimensionMismatch(f"gamma needs {K * (K + 1) // 2} entries, got {gamma.size}")
        if not np.all(np.isfinite(gamma)):
            raise DimensionMismatch("gamma must be finite")
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)

    def unique_elements(self) -> np.ndarray:
        K = self.partition.K
        G = np.zeros((K, K))
        G[np.tril_indices(K)] = self.gamma
        return G + np.tril(G, -1).T


class Validity(enum.Enum):
    VALID = "valid"
    BOUNDARY = "semidefinite_boundary"
    INVALID = "invalid"


@dataclass(frozen=True)
class ValidityReport:
    status: Validity
    min_eig_A: float
    offending_blocks: tuple[int, ...]
    lambdas: tuple[float, ...]

    @property
    def is_valid(self) -> bool:
        return self.status is Validity.VALID


def _pd_band(A: np.ndarray, pd_rtol: float) -> float:
    return pd_rtol * max(1.0, float(np.max(np.abs(A))))


def is_valid_correlation(C: BlockCorrelation, pd_rtol: float = PD_RTOL) -> ValidityReport:
    """C is a non-singular correlation matrix iff A is PD and |rho_ii| < 1."""
    cf = C.canonical()
    active = C.partition.active
    band = _pd_band(cf.A, pd_rtol)
    min_eig = float(np.linalg.eigvalsh(cf.A)[0])

    within = np.abs(np.diag(C.rho))
    on_edge = active & (within >= 1.0 - band)
    offending = tuple(int(k) for k in np.flatnonzero(on_edge))

    if min_eig < -band:
        status = Validity.INVALID
    elif min_eig <= band or offending:
        status = Validity.BOUNDARY
    else:
        status = Validity.VALID
    log.debug("Correlation check K=%d: %s (min eig A %.3e)", C.partition.K, status.value, min_eig)
    return ValidityReport(status, min_eig, offending, tuple(float(x) for x in cf.active_lambdas))


# ── Determinant, inverse, powers ─────────────────────────────


def log_determinant(cf: CanonicalForm) -> tuple[float, float]:
    """(sign, log|det B|) from LU of A plus (n_k - 1) log|lambda_k|."""
    sign, logabs = np.linalg.slogdet(cf.A)
    mult = np.asarray(cf.partition.sizes)[cf.partition.active] - 1
    lam = cf.active_lambdas
    if sign == 0 or np.any(lam == 0):
        return 0.0, -np.inf
    sign *= np.prod(np.sign(lam) ** mult)
    logabs += float(np.sum(mult * np.log(np.abs(lam))))
    return float(sign), float(logabs)


def determinant(cf: CanonicalForm) -> float:
    """det(A) * prod lambda_k^(n_k - 1); 0 for singular B."""
    sign, logabs = log_determinant(cf)
    return 0.0 if sign == 0 else sign * float(np.exp(logabs))


def _check_invertible(cf: CanonicalForm) -> None:
    problems = []
    cond = np.linalg.cond(cf.A)
    if not np.isfinite(cond) or cond * np.finfo(float).eps >= 1.0:
        problems.append("A")
    zero = np.flatnonzero(cf.partition.active & (cf.lambdas == 0))
    problems.extend(f"lambda of block {k}" for k in zero)
    if problems:
        raise Singular("singular: " + ", ".join(problems))


def _map_lambdas(cf: CanonicalForm, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    out = cf.lambdas.copy()
    active = cf.partition.active
    out[active] = fn(cf.lambdas[active])
    return out


def inverse(cf: CanonicalForm) -> CanonicalForm:
    """(A^-1, 1/lambda). Raises Singular naming A and/or the zero lambdas."""
    _check_invertible(cf)
    return CanonicalForm(cf.partition, np.linalg.inv(cf.A), _map_lambdas(cf, np.reciprocal))


def power(cf: CanonicalForm, q: int) -> CanonicalForm:
    """(A^q, lambda^q) for integer q; negative q needs an invertible B."""
    q = operator.index(q)
    if q == -1:
        return inverse(cf)
    if q < 0:
        base = inverse(cf)
        return CanonicalForm(
            cf.partition,
            np.linalg.matrix_power(base.A, -q),
            _map_lambdas(base, lambda lam: lam ** (-q)),
        )
    return CanonicalForm(
        cf.partition,
        np.linalg.matrix_power(cf.A, q),
        _map_lambdas(cf, lambda lam: lam**q),
    )


# ── Exponential and logarithm ────────────────────────────────


def mexp(cf: CanonicalForm) -> CanonicalForm:
    """(exp A, e^lambda); exp A by scaling-and-squaring Pade."""
    return CanonicalForm(cf.partition, scipy.linalg.expm(cf.A), _map_lambdas(cf, np.exp))


def mlog(
    cf: CanonicalForm,
    asym_tol: float = ASYM_TOL,
    pd_rtol: float = PD_RTOL,
) -> CanonicalForm:
    """Real principal logarithm: (log A via eigendecomposition, log lambda)."""
    A = cf.A
    scale = max(1.0, float(np.max(np.abs(A))))
    asymmetry = float(np.max(np.abs(A - A.T)))
    if asymmetry > asym_tol * scale:
        raise NotRealLoggable(f"A is not symmetric (asymmetry {asymmetry:.3e})")
    if asymmetry > 0:
        log.debug("Symmetrizing A before log (asymmetry %.2e)", asymmetry)

    w, V = np.linalg.eigh((A + A.T) / 2.0)
    if w[0] <= pd_rtol * scale:
        raise NotRealLoggable(f"A is not positive definite (min eigenvalue {w[0]:.3e})")
    bad = np.flatnonzero(cf.partition.active & (cf.lambdas <= 0))
    if bad.size:
        k = int(bad[0])
        raise NotRealLoggable(f"lambda of block {k} is {cf.lambdas[k]:.3e} <= 0")

    log_A = (V * np.log(w)) @ V.T
    return CanonicalForm(cf.partition, log_A, _map_lambdas(cf, np.log))


# ── Equal block sizes ────────────────────────────────────────


_KRON_FUNCTIONS = {"inv": inverse, "exp": mexp, "log": mlog}


def kron_fast_path(cf: CanonicalForm, fn: str | int) -> CanonicalForm:
    """h(B) for B = A (x) P + Lambda (x) P_perp with all blocks of one size.

    With equal sizes h(B) = h(A) (x) P + h(Lambda) (x) P_perp, which is the
    canonical form identity itself, so the result matches the general path.
    fn is "inv", "exp", "log" or an integer power.
    """
    if not cf.partition.is_equal_sized():
        raise UnequalBlocks(f"block sizes differ: {cf.partition.sizes}")
    if isinstance(fn, str):
        try:
            return _KRON_FUNCTIONS[fn](cf)
        except KeyError:
            raise ValueError(f"unknown function {fn!r}") from None
    return power(cf, fn)


def kron_expand(cf: CanonicalForm) -> np.ndarray:
    """Dense A (x) P + diag(lambda) (x) P_perp for equal block sizes."""
    if not cf.partition.is_equal_sized():
        raise UnequalBlocks(f"block sizes differ: {cf.partition.sizes}")
    m = cf.partition.sizes[0]
    P = np.full((m, m), 1.0 / m)
    return np.kron(cf.A, P) + np.kron(np.diag(cf.lambdas), np.eye(m) - P)


# ── Log parametrization of block correlations ────────────────


def param_unique_elements(C: BlockCorrelation) -> np.ndarray:
    """K x K matrix Lambda_n^-1 [log A - log Lambda_{1-rho}] Lambda_n^-1.

    Off-diagonal entries are the between-block values of log C; diagonal
    entries are the within-block off-diagonal values. A block of size one has
    rho_kk = 0, so its entry is (log A)_kk, the diagonal of log C there.
    """
    partition = C.partition
    log_A = mlog(C.canonical()).A
    log_lambda = np.zeros(partition.K)
    active = partition.active
    log_lambda[active] = np.log1p(-np.diag(C.rho)[active])
    root_n = np.sqrt(partition.size_array)
    return (log_A - np.diag(log_lambda)) / np.outer(root_n, root_n)


def to_param(C: BlockCorrelation) -> CorrelationParam:
    G = param_unique_elements(C)
    return CorrelationParam(C.partition, G[np.tril_indices(C.partition.K)])


def from_param(
    param: CorrelationParam,
    tol: float = 1e-12,
    max_iter: int = 1000,
) -> BlockCorrelation:
    """The block correlation matrix whose log has the given unique elements.

    The diagonal x of log C is found by x <- x - log diag(exp(L(x))), all in
    canonical K x K form. Gamma entries of blocks of size one are ignored:
    the unit diagonal determines them.
    """
    partition = param.partition
    G = param.unique_elements()
    x = np.zeros(partition.K)

    def exp_of(diag: np.ndarray) -> BlockMatrix:
        return decanonicalize(mexp(canonicalize(BlockMatrix(partition, diag, G))))

    for iteration in range(1, max_iter + 1):
        step = np.log(exp_of(x).diag_values)
        x = x - step
        if np.max(np.abs(step)) <= tol:
            break
    else:
        raise Degenerate(f"log-diagonal iteration did not converge in {max_iter} steps")
    log.debug("from_param converged after %d iterations", iteration)

    rho = exp_of(x).block_values
    return BlockCorrelation(partition, (rho + rho.T) / 2.0)
