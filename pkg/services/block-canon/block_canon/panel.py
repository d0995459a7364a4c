"""
Returns panels and hierarchical group maps.

A panel is a CSV with one row per date: the first column holds the date, the
header holds asset ids. A group map is a CSV with columns asset_id,label where
labels are dotted prefixes ("45.4510.451020"). Level l keeps the first l
components, so deeper levels refine shallower ones.

LEARNING (Python):
  pandas.read_csv(index_col=0) turns the date column into the row index,
  leaving a purely numeric frame whose .to_numpy() is the N x n matrix.
  sorted() with a tuple key sorts by label first and breaks ties by id.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .block_core import BlockPartition
from .errors import InputError, UnmappedAsset

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ReturnsPanel:
    asset_ids: tuple[str, ...]
    dates: tuple[str, ...]
    X: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2 or X.shape != (len(self.dates), len(self.asset_ids)):
            raise InputError(
                f"panel shape {X.shape} does not match {len(self.dates)} dates "
                f"x {len(self.asset_ids)} assets"
            )
        if X.size == 0:
            raise InputError("panel needs at least one date and one asset")
        if not np.all(np.isfinite(X)):
            raise InputError("panel has missing or non-finite returns")
        if len(set(self.asset_ids)) != len(self.asset_ids):
            raise InputError("duplicate asset ids in panel header")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "asset_ids", tuple(str(a) for a in self.asset_ids))
        object.__setattr__(self, "dates", tuple(str(d) for d in self.dates))

    @classmethod
    def from_csv(cls, path: str | Path) -> "ReturnsPanel":
        try:
            frame = pd.read_csv(path, index_col=0)
            frame.columns = [str(c) for c in frame.columns]
            values = frame.apply(pd.to_numeric, errors="coerce")
        except (OSError, ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise InputError(f"{path}: {e}") from e
        missing = values.isna().any(axis=0)
        if missing.any():
            raise InputError(
                f"{path}: missing or non-numeric returns for {list(values.columns[missing])[:10]}"
            )
        log.info("Loaded panel %s: %d dates x %d assets", path, *values.shape)
        return cls(tuple(values.columns), tuple(values.index.astype(str)), values.to_numpy())

    def to_csv(self, path: str | Path) -> None:
        frame = pd.DataFrame(self.X, index=pd.Index(self.dates, name="date"), columns=self.asset_ids)
        frame.to_csv(path, float_format="%.17g")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def demeaned(self) -> "ReturnsPanel":
        return ReturnsPanel(self.asset_ids, self.dates, self.X - self.X.mean(axis=0))

    def select(self, order) -> "ReturnsPanel":
        """Columns reordered by the index array ``order``."""
        order = np.asarray(order, dtype=int)
        return ReturnsPanel(tuple(self.asset_ids[i] for i in order), self.dates, self.X[:, order])


@dataclass(frozen=True)
class GroupedAssets:
    """Assets sorted into contiguous blocks at one level of the hierarchy.

    order[j] is the panel column placed at position j.
    """

    order: np.ndarray
    asset_ids: tuple[str, ...]
    block_labels: tuple[str, ...]
    partition: BlockPartition


@dataclass(frozen=True)
class GroupMap:
    labels: dict[str, str]

    @classmethod
    def from_csv(cls, path: str | Path) -> "GroupMap":
        try:
            frame = pd.read_csv(path, dtype=str)
        except (OSError, ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise InputError(f"{path}: {e}") from e
        if not {"asset_id", "label"} <= set(frame.columns):
            raise InputError(f"{path}: group map needs columns asset_id,label")
        if frame["asset_id"].duplicated().any():
            raise InputError(f"{path}: duplicate asset ids in group map")
        frame = frame.fillna("")
        return cls(dict(zip(frame["asset_id"].str.strip(), frame["label"].str.strip())))

    def to_csv(self, path: str | Path) -> None:
        frame = pd.DataFrame({"asset_id": list(self.labels), "label": list(self.labels.values())})
        frame.to_csv(path, index=False)

    @property
    def depth(self) -> int:
        """Largest number of label components."""
        return max((len(label.split(".")) for label in self.labels.values()), default=0)

    def label_at(self, asset_id: str, level: int) -> str:
        if level <= 0:
            return ""
        return ".".join(self.labels[asset_id].split(".")[:level])

    def partition(self, asset_ids, level: int) -> GroupedAssets:
        asset_ids = [str(a) for a in asset_ids]
        unmapped = [a for a in asset_ids if a not in self.labels]
        if unmapped:
            raise UnmappedAsset(unmapped)

        def key(i: int):
            return tuple(self.labels[asset_ids[i]].split(".")), asset_ids[i]

        order = np.array(sorted(range(len(asset_ids)), key=key), dtype=int)
        sorted_ids = tuple(asset_ids[i] for i in order)
        level_labels = [self.label_at(a, level) for a in sorted_ids]
        partition = BlockPartition.from_labels(level_labels)

        block_labels = tuple(level_labels[s] for s in partition.offsets)
        log.debug("Level %d: %d assets in %d blocks", level, len(sorted_ids), partition.K)
        return GroupedAssets(order, sorted_ids, block_labels, partition)
