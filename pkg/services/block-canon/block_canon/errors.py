"""
Error hierarchy: every failure the library can report, with its CLI exit code.

LEARNING (Python):
  Multiple inheritance lets an error be caught either by our own base
  class or by the familiar builtin one (ValueError, numpy's LinAlgError),
  so callers that never heard of block_canon still handle it sensibly.
"""

import numpy as np


class BlockCanonError(Exception):
    """Base class. ``exit_code`` is what the CLI returns for this error."""

    exit_code = 1

    def __init__(self, detail: str = ""):
        super().__init__(detail)
        self.detail = detail


# ── Input problems (exit 2) ──────────────────────────────────


class InputError(BlockCanonError):
    exit_code = 2


class UnmappedAsset(InputError):
    def __init__(self, assets: list[str]):
        shown = ", ".join(assets[:10])
        more = f" (+{len(assets) - 10} more)" if len(assets) > 10 else ""
        super().__init__(f"assets missing from group map: {shown}{more}")
        self.assets = assets


class DimensionMismatch(InputError, ValueError):
    pass


class InvalidPartition(InputError, ValueError):
    pass


# ── Degenerate data (exit 3) ─────────────────────────────────


class ZeroVariance(BlockCanonError):
    exit_code = 3

    def __init__(self, column: int | str):
        super().__init__(f"column {column!r} has zero second moment")
        self.column = column


class Degenerate(BlockCanonError):
    exit_code = 3


# ── Structure / PD violations (exit 4) ───────────────────────


class StructureViolation(BlockCanonError):
    exit_code = 4


class UnequalBlocks(StructureViolation):
    pass


# ── Numerical failures (exit 5, 6) ───────────────────────────


class Singular(BlockCanonError, np.linalg.LinAlgError):
    exit_code = 5


class NotSPD(Singular):
    pass


class NotRealLoggable(BlockCanonError):
    exit_code = 6
