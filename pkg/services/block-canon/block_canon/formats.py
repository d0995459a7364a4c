"""
File formats: dense matrices as CSV or BCAN1 binary, block matrices as JSON.

LEARNING (Python):
  Pure functions (path in, array out) are the easiest code to test:
  pytest's tmp_path fixture hands each test a fresh directory.
  numpy dtype strings like "<f8" pin byte order and width explicitly,
  which is what makes a binary format portable.
"""

import json
import math
from pathlib import Path

import numpy as np

from .block_core import BlockMatrix, BlockPartition
from .errors import BlockCanonError, InputError

MAGIC = b"BCAN1"
_HEADER = len(MAGIC) + 16  # magic + u64 rows + u64 cols


# ── Dense matrices ───────────────────────────────────────────


def _check_finite(M: np.ndarray, source: str) -> np.ndarray:
    if not np.all(np.isfinite(M)):
        raise InputError(f"{source}: matrix has non-finite entries")
    return M


def read_matrix_csv(path: str | Path) -> np.ndarray:
    """Row-major CSV, '.' decimals, no header."""
    try:
        M = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as e:
        raise InputError(f"{path}: {e}") from e
    return _check_finite(M, str(path))


def write_matrix_csv(path: str | Path, M: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt="%.17g")


def read_matrix_binary(path: str | Path) -> np.ndarray:
    """BCAN1: magic, u64 rows, u64 cols, then little-endian f64 row-major."""
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"{path}: {e}") from e
    if not data.startswith(MAGIC) or len(data) < _HEADER:
        raise InputError(f"{path}: not a BCAN1 file")
    rows, cols = (int(v) for v in np.frombuffer(data, dtype="<u8", count=2, offset=len(MAGIC)))
    expected = _HEADER + 8 * rows * cols
    if len(data) != expected:
        raise InputError(f"{path}: expected {expected} bytes for {rows}x{cols}, got {len(data)}")
    M = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=_HEADER)
    return _check_finite(M.reshape(rows, cols).astype(float), str(path))


def write_matrix_binary(path: str | Path, M: np.ndarray) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    header = MAGIC + np.asarray(M.shape, dtype="<u8").tobytes()
    Path(path).write_bytes(header + np.ascontiguousarray(M, dtype="<f8").tobytes())


def matrix_kind(path: str | Path) -> str:
    """'json', 'bin' or 'csv', decided by the file suffix."""
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return "json"
    if suffix in (".bin", ".bcan"):
        return "bin"
    return "csv"


def read_matrix(path: str | Path) -> np.ndarray:
    return read_matrix_binary(path) if matrix_kind(path) == "bin" else read_matrix_csv(path)


def write_matrix(path: str | Path, M: np.ndarray) -> None:
    if matrix_kind(path) == "bin":
        write_matrix_binary(path, M)
    else:
        write_matrix_csv(path, M)


# ── Block matrices ───────────────────────────────────────────


def block_matrix_to_dict(B: BlockMatrix) -> dict:
    return {
        "sizes": list(B.partition.sizes),
        "d": B.diag_values.tolist(),
        "b": B.block_values.tolist(),
    }


def block_matrix_from_dict(data: dict) -> BlockMatrix:
    """Accepts {"sizes", "d", "b"}; {"sizes", "rho"} is read as d = 1."""
    try:
        partition = BlockPartition(tuple(data["sizes"]))
        if "rho" in data:
            return BlockMatrix(partition, np.ones(partition.K), data["rho"])
        return BlockMatrix(partition, data["d"], data["b"])
    except KeyError as e:
        raise InputError(f"block JSON is missing key {e}") from e
    except (TypeError, ValueError) as e:
        if isinstance(e, BlockCanonError):
            raise
        raise InputError(f"malformed block JSON: {e}") from e


def read_block_json(path: str | Path) -> BlockMatrix:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"{path}: {e}") from e
    return block_matrix_from_dict(data)


def write_block_json(path: str | Path, B: BlockMatrix) -> None:
    Path(path).write_text(dumps(block_matrix_to_dict(B)) + "\n")


# ── JSON helpers ─────────────────────────────────────────────


def jsonable(value):
    """numpy → plain Python, NaN/inf → None, recursively."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps(obj) -> str:
    """Deterministic JSON text (insertion order, repr floats, no NaN)."""
    return json.dumps(jsonable(obj), indent=2, allow_nan=False)
