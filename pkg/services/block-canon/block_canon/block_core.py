"""
Block matrices and their canonical form B = Q D Q'.

A block matrix on the partition (n_1, ..., n_K) is described by K diagonal
values d_i and a K x K grid of block values b_ij. The rotation Q stacks the
block-mean vectors v_{n_k} (first K columns) and, per block, an orthonormal
complement v_{n_k,perp}. Q' B Q is then block diagonal:

    D = diag(A, lambda_1 I_{n_1 - 1}, ..., lambda_K I_{n_K - 1})

so anything computed from B can be computed from the K x K matrix A plus K
scalars. Q itself is never materialized here: Rotation applies it in O(n m)
using block sums and Helmert contrasts.

LEARNING (Python):
  Frozen dataclasses can still hold numpy arrays. We copy them in
  __post_init__ and flip the WRITEABLE flag off, so a "frozen" value is
  frozen all the way down. object.__setattr__ is the sanctioned way to
  assign fields of a frozen dataclass during construction.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .config import STRUCT_TOL
from .errors import DimensionMismatch, InvalidPartition, StructureViolation

log = logging.getLogger(__name__)


def _frozen(values, shape: tuple[int, ...] | None = None, name: str = "array") -> np.ndarray:
    """Copy into a float array, check its shape and make it read-only."""
    out = np.array(values, dtype=float)
    if shape is not None and out.shape != shape:
        raise DimensionMismatch(f"{name} has shape {out.shape}, expected {shape}")
    out.setflags(write=False)
    return out


# ── Partition ────────────────────────────────────────────────


@dataclass(frozen=True)
class BlockPartition:
    """Ordered block sizes (n_1, ..., n_K)."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes:
            raise InvalidPartition("a partition needs at least one block")
        if min(sizes) < 1:
            raise InvalidPartition(f"block sizes must be >= 1, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def from_labels(cls, labels: Sequence[str]) -> "BlockPartition":
        """Sizes of the runs of equal consecutive labels; runs must not repeat."""
        sizes: list[int] = []
        seen: set[str] = set()
        previous = object()
        for label in labels:
            if label == previous:
                sizes[-1] += 1
                continue
            if label in seen:
                raise InvalidPartition(f"label {label!r} is not contiguous")
            seen.add(label)
            sizes.append(1)
            previous = label
        return cls(tuple(sizes))

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def K(self) -> int:
        return len(self.sizes)

    @property
    def size_array(self) -> np.ndarray:
        return np.asarray(self.sizes, dtype=float)

    @property
    def offsets(self) -> np.ndarray:
        """Index of the first row of each block (n_1 + ... + n_{k-1})."""
        return np.concatenate(([0], np.cumsum(self.sizes)[:-1])).astype(int)

    @property
    def active(self) -> np.ndarray:
        """Blocks with n_k >= 2, i.e. blocks that own a lambda."""
        return np.asarray(self.sizes) >= 2

    def block_slice(self, k: int) -> slice:
        start = int(self.offsets[k])
        return slice(start, start + self.sizes[k])

    def block_ids(self) -> np.ndarray:
        """Block index of every coordinate 0..n-1."""
        return np.repeat(np.arange(self.K), self.sizes)

    def contrast_slice(self, k: int) -> slice:
        """Rows of Q'X holding the within-block contrasts y_k."""
        start = self.K + sum(s - 1 for s in self.sizes[:k])
        return slice(start, start + self.sizes[k] - 1)

    def is_equal_sized(self) -> bool:
        return len(set(self.sizes)) == 1


# ── Block matrix and canonical form ──────────────────────────


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """Compressed n x n block matrix: d_i on block diagonals, b_ij elsewhere.

    block_values is stored in full (no symmetry assumed). For blocks of size
    one b_ii has no entry to describe and is stored as 0.
    """

    partition: BlockPartition
    diag_values: np.ndarray
    block_values: np.ndarray

    def __post_init__(self):
        K = self.partition.K
        d = np.array(self.diag_values, dtype=float).reshape(-1)
        b = np.array(self.block_values, dtype=float)
        if d.shape != (K,):
            raise DimensionMismatch(f"diag_values has {d.size} entries for K={K}")
        if b.shape != (K, K):
            raise DimensionMismatch(f"block_values has shape {b.shape} for K={K}")
        single = ~self.partition.active
        b[single, single] = 0.0
        object.__setattr__(self, "diag_values", _frozen(d))
        object.__setattr__(self, "block_values", _frozen(b))

    def allclose(self, other: "BlockMatrix", tol: float = 1e-12) -> bool:
        return (
            self.partition == other.partition
            and np.max(np.abs(self.diag_values - other.diag_values)) <= tol
            and np.max(np.abs(self.block_values - other.block_values)) <= tol
        )


@dataclass(frozen=True, eq=False)
class CanonicalForm:
    """The pair (A, lambda) standing for D = diag(A, lambda_k I_{n_k - 1}).

    For blocks of size one lambda_k has multiplicity zero; its slot is set to
    a_kk so that results round-trip through decanonicalize/canonicalize.
    """

    partition: BlockPartition
    A: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        K = self.partition.K
        A = _frozen(self.A, (K, K), "A")
        lam = np.array(self.lambdas, dtype=float).reshape(-1)
        if lam.shape != (K,):
            raise DimensionMismatch(f"lambdas has {lam.size} entries for K={K}")
        single = ~self.partition.active
        lam[single] = np.diag(A)[single]
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "lambdas", _frozen(lam))

    @property
    def active_lambdas(self) -> np.ndarray:
        return self.lambdas[self.partition.active]

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of B: those of A plus each lambda_k repeated n_k - 1 times."""
        repeated = np.repeat(self.lambdas, np.asarray(self.partition.sizes) - 1)
        return np.concatenate((np.linalg.eigvals(self.A), repeated))


def expand(B: BlockMatrix) -> np.ndarray:
    """Dense n x n matrix with d_i on block diagonals and b_ij elsewhere."""
    sizes = B.partition.sizes
    M = np.repeat(np.repeat(B.block_values, sizes, axis=0), sizes, axis=1)
    np.fill_diagonal(M, np.repeat(B.diag_values, sizes))
    return M


def _fit_constant(values: np.ndarray) -> float:
    # Offset by the first entry so identical entries average back exactly.
    ref = values.flat[0]
    return float(ref + np.mean(values - ref))


def compress(M, partition: BlockPartition, tol: float = STRUCT_TOL) -> BlockMatrix:
    """Average a dense matrix within blocks; reject it if any entry strays > tol."""
    M = np.asarray(M, dtype=float)
    n, K = partition.n, partition.K
    if M.shape != (n, n):
        raise DimensionMismatch(f"matrix has shape {M.shape}, partition needs ({n}, {n})")

    d = np.empty(K)
    b = np.zeros((K, K))
    for i in range(K):
        rows = partition.block_slice(i)
        for j in range(K):
            block = M[rows, partition.block_slice(j)]
            if i != j:
                b[i, j] = _fit_constant(block)
                continue
            d[i] = _fit_constant(np.diagonal(block))
            if partition.sizes[i] > 1:
                b[i, i] = _fit_constant(block[~np.eye(partition.sizes[i], dtype=bool)])

    B = BlockMatrix(partition, d, b)
    deviation = float(np.max(np.abs(expand(B) - M)))
    if deviation > tol:
        raise StructureViolation(
            f"matrix is not block structured on {partition.sizes}: "
            f"max deviation {deviation:.3e} > tol {tol:.1e}"
        )
    log.debug("Compressed %dx%d matrix onto %d blocks (deviation %.2e)", n, n, K, deviation)
    return B


def infer_partition(M, tol: float = STRUCT_TOL) -> BlockPartition:
    """Coarsest contiguous partition whose neighbours look exchangeable.

    Indices i and i+1 share a block when their rows and columns agree outside
    the 2x2 patch they span, their diagonal entries agree, the patch is
    symmetric and, inside a run, M[i, i+1] repeats the previous within-block
    value. compress() still has the final word.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {M.shape}")
    n = M.shape[0]
    sizes = [1]
    for i in range(n - 1):
        others = np.ones(n, dtype=bool)
        others[[i, i + 1]] = False
        same = (
            abs(M[i, i] - M[i + 1, i + 1]) <= tol
            and abs(M[i, i + 1] - M[i + 1, i]) <= tol
            and np.all(np.abs(M[i, others] - M[i + 1, others]) <= tol)
            and np.all(np.abs(M[others, i] - M[others, i + 1]) <= tol)
        )
        if same and sizes[-1] > 1:
            same = abs(M[i, i + 1] - M[i, i - 1]) <= tol
        if same:
            sizes[-1] += 1
        else:
            sizes.append(1)
    return BlockPartition(tuple(sizes))


def canonicalize(B: BlockMatrix) -> CanonicalForm:
    """a_ij = b_ij sqrt(n_i n_j), a_ii = d_i + (n_i - 1) b_ii, lambda_i = d_i - b_ii."""
    n = B.partition.size_array
    root = np.sqrt(n)
    within = np.diag(B.block_values)
    A = B.block_values * np.outer(root, root)
    np.fill_diagonal(A, B.diag_values + (n - 1.0) * within)
    return CanonicalForm(B.partition, A, B.diag_values - within)


def decanonicalize(cf: CanonicalForm) -> BlockMatrix:
    """Inverse of canonicalize. Blocks of size one get d_i = a_ii and b_ii = 0."""
    partition = cf.partition
    n = partition.size_array
    active = partition.active
    root = np.sqrt(n)
    a_diag = np.diag(cf.A)

    b = cf.A / np.outer(root, root)
    within = np.where(active, (a_diag - cf.lambdas) / n, 0.0)
    np.fill_diagonal(b, within)
    d = np.where(active, cf.lambdas + within, a_diag)
    return BlockMatrix(partition, d, b)


# ── Rotation ─────────────────────────────────────────────────


def _helmert_contrasts(block: np.ndarray, running: np.ndarray) -> np.ndarray:
    # Row j (1..m-1): (x_0 + ... + x_{j-1} - j x_j) / sqrt(j (j + 1))
    j = np.arange(1, block.shape[0], dtype=float)[:, None]
    return (running[:-1] - j * block[1:]) / np.sqrt(j * (j + 1.0))


def _helmert_back(mean_row: np.ndarray, contrasts: np.ndarray, m: int) -> np.ndarray:
    out = np.empty((m, mean_row.shape[0]))
    out[:] = mean_row / np.sqrt(m)
    if m == 1:
        return out
    j = np.arange(1, m, dtype=float)[:, None]
    w = contrasts / np.sqrt(j * (j + 1.0))
    # out_i += sum_{j > i} w_j - i w_i
    out[: m - 1] += np.cumsum(w[::-1], axis=0)[::-1]
    out[1:] -= j * w
    return out


@dataclass(frozen=True, eq=False)
class Rotation:
    """The orthonormal Q of a partition, applied without materializing it.

    The default within-block complement is the Helmert basis. ``complements``
    may supply one orthonormal n_k x (n_k - 1) matrix per block (None keeps
    Helmert for that block); only y_k'y_k is invariant to that choice.
    """

    partition: BlockPartition
    complements: tuple[np.ndarray | None, ...] | None = None

    def __post_init__(self):
        if self.complements is None:
            return
        if len(self.complements) != self.partition.K:
            raise DimensionMismatch("need one complement (or None) per block")
        checked = []
        for k, (m, V) in enumerate(zip(self.partition.sizes, self.complements)):
            if V is None:
                checked.append(None)
                continue
            V = _frozen(V, (m, m - 1), f"complement {k}")
            gram_error = np.max(np.abs(V.T @ V - np.eye(m - 1)), initial=0.0)
            mean_error = np.max(np.abs(V.sum(axis=0)), initial=0.0)
            if gram_error > 1e-10 or mean_error > 1e-10:
                raise StructureViolation(f"complement {k} is not an orthonormal complement of v_n")
            checked.append(V)
        object.__setattr__(self, "complements", tuple(checked))

    def _custom(self, k: int) -> np.ndarray | None:
        return None if self.complements is None else self.complements[k]

    def complement(self, k: int) -> np.ndarray:
        """Dense v_{n_k,perp} (n_k x (n_k - 1)); n_k = 1 gives a 1 x 0 matrix."""
        custom = self._custom(k)
        if custom is not None:
            return custom
        m = self.partition.sizes[k]
        if m == 1:
            return np.zeros((1, 0))
        return scipy.linalg.helmert(m).T

    def apply(self, X) -> np.ndarray:
        """Q'X: K rows of scaled block sums, then the contrasts of each block."""
        X, vector = _as_columns(X, self.partition.n)
        out = np.empty_like(X)
        for k, m in enumerate(self.partition.sizes):
            block = X[self.partition.block_slice(k)]
            running = np.cumsum(block, axis=0)
            out[k] = running[-1] / np.sqrt(m)
            if m == 1:
                continue
            custom = self._custom(k)
            rows = self.partition.contrast_slice(k)
            out[rows] = custom.T @ block if custom is not None else _helmert_contrasts(block, running)
        return out[:, 0] if vector else out

    def apply_back(self, Y) -> np.ndarray:
        """QY, the adjoint (and inverse) of apply."""
        Y, vector = _as_columns(Y, self.partition.n)
        out = np.empty_like(Y)
        for k, m in enumerate(self.partition.sizes):
            contrasts = Y[self.partition.contrast_slice(k)]
            custom = self._custom(k)
            if custom is not None:
                out[self.partition.block_slice(k)] = Y[k] / np.sqrt(m) + custom @ contrasts
            else:
                out[self.partition.block_slice(k)] = _helmert_back(Y[k], contrasts, m)
        return out[:, 0] if vector else out

    def matrix(self) -> np.ndarray:
        """Q as a dense n x n matrix. Quadratic memory; meant for small n."""
        return self.apply_back(np.eye(self.partition.n))


def _as_columns(X, n: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=float)
    vector = X.ndim == 1
    if vector:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != n:
        raise DimensionMismatch(f"expected {n} rows, got shape {X.shape}")
    return X, vector


def rotate(X, partition: BlockPartition, rotation: Rotation | None = None) -> np.ndarray:
    """Q'X without forming Q."""
    return (rotation or Rotation(partition)).apply(X)


def rotate_back(Y, partition: BlockPartition, rotation: Rotation | None = None) -> np.ndarray:
    """QY without forming Q."""
    return (rotation or Rotation(partition)).apply_back(Y)


# ── Rectangular block matrices ───────────────────────────────


@dataclass(frozen=True, eq=False)
class PaddedBlockMatrix:
    """A rectangular block matrix embedded in a square one by zero blocks."""

    block: BlockMatrix
    shape: tuple[int, int]
    row_blocks: int
    col_blocks: int

    def expand(self) -> np.ndarray:
        rows, cols = self.shape
        return expand(self.block)[:rows, :cols]

    def rotations(self) -> tuple[np.ndarray, np.ndarray]:
        """(L, R) with expand() == L @ D @ R.T, D the canonical core of block.

        The padded side uses only the leading rows of Q that survive the slice.
        """
        Q = Rotation(self.block.partition).matrix()
        rows, cols = self.shape
        return Q[:rows], Q[:cols]


def pad_rectangular(
    block_values,
    diag_values,
    row_partition: BlockPartition,
    col_partition: BlockPartition,
) -> PaddedBlockMatrix:
    """Append zero blocks to a K1 x K2 block grid until it is square.

    The shorter partition must be a prefix of the longer one, so the padded
    matrix is a block matrix on the longer partition. diag_values holds d_i
    for the min(K1, K2) blocks that sit on the diagonal.
    """
    K1, K2 = row_partition.K, col_partition.K
    grid = np.asarray(block_values, dtype=float)
    if grid.shape != (K1, K2):
        raise DimensionMismatch(f"block grid has shape {grid.shape}, expected ({K1}, {K2})")
    longer, shorter = (row_partition, col_partition) if K1 >= K2 else (col_partition, row_partition)
    if longer.sizes[: shorter.K] != shorter.sizes:
        raise DimensionMismatch(
            f"partitions {row_partition.sizes} and {col_partition.sizes} do not nest"
        )

    K = longer.K
    b = np.zeros((K, K))
    b[:K1, :K2] = grid
    d = np.zeros(K)
    d[: min(K1, K2)] = np.asarray(diag_values, dtype=float).reshape(-1)
    padded = BlockMatrix(longer, d, b)
    if K1 != K2:
        log.debug("Padded %dx%d block grid to %dx%d", K1, K2, K, K)
    return PaddedBlockMatrix(padded, (row_partition.n, col_partition.n), K1, K2)
