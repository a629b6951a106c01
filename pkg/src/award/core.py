"""Data containers shared by every algorithm in the package.

``DataMatrix`` holds the entity-by-feature table, ``Partition`` a crisp
assignment of entities to clusters, ``ClusterState`` the (partition,
centroids, weights) triple produced by the weighted k-means variants and
``Dendrogram`` the ordered merge records of an agglomeration.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Hashable, Iterable

import numpy as np

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-9


class ConvergenceError(RuntimeError):
    """Raised when an iterative procedure hits its safety cap."""


@dataclass(frozen=True)
class DataMatrix:
    """An ``N x V`` table of finite reals; rows are entities."""

    values: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("data contains NaN or infinite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.feature_names is not None:
            names = tuple(str(n) for n in self.feature_names)
            if len(names) != values.shape[1]:
                raise ValueError(
                    f"{len(names)} feature names given for {values.shape[1]} features")
            object.__setattr__(self, "feature_names", names)

    @property
    def n_entities(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> tuple[str, ...]:
        if self.feature_names is not None:
            return self.feature_names
        return tuple(f"f{v}" for v in range(self.n_features))

    def subset(self, rows) -> "DataMatrix":
        return DataMatrix(self.values[rows], self.feature_names)

    def __len__(self):
        return self.n_entities


def as_matrix(data) -> DataMatrix:
    if isinstance(data, DataMatrix):
        return data
    return DataMatrix(np.asarray(data, dtype=float))


@dataclass(frozen=True)
class Partition:
    """Dense cluster labels ``0..k-1``, each label used at least once."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64, copy=True).ravel()
        if labels.size == 0:
            raise ValueError("a partition needs at least one entity")
        k = int(labels.max()) + 1
        if labels.min() < 0 or np.unique(labels).size != k:
            raise ValueError("labels must use every id in 0..k-1")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def k(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def clusters(self) -> list[np.ndarray]:
        return [self.members(c) for c in range(self.k)]

    def __len__(self):
        return self.n


def partition_from_labels(raw: Iterable[Hashable]) -> Partition:
    """Re-encode arbitrary labels densely in order of first occurrence.

    >>> partition_from_labels(["a", "b", "a"]).labels.tolist()
    [0, 1, 0]
    """
    raw = list(raw.tolist() if isinstance(raw, np.ndarray) else raw)
    if not raw:
        raise ValueError("cannot build a partition from an empty label list")
    codes: dict = {}
    labels = [codes.setdefault(r, len(codes)) for r in raw]
    return Partition(np.asarray(labels, dtype=np.int64))


def compact_labels(labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Drop unused ids from ``labels`` keeping the relative order of the
    survivors. Returns the relabelled array and the surviving old ids."""
    used = np.flatnonzero(np.bincount(labels, minlength=k) > 0)
    remap = np.full(k, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    return remap[labels], used


@dataclass(frozen=True)
class ClusterState:
    """Partition, centroids and per-cluster feature weights.

    ``n_iter`` and ``dropped`` record how the producing algorithm ran; the
    dropped entries are the ids (in the initial numbering) of clusters that
    became empty and were removed.
    """

    partition: Partition
    centroids: np.ndarray
    weights: np.ndarray
    p: float
    beta: float
    n_iter: int = 0
    dropped: tuple[int, ...] = ()

    def __post_init__(self):
        k = self.partition.k
        centroids = np.asarray(self.centroids, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if centroids.shape[0] != k or weights.shape != centroids.shape:
            raise ValueError("centroids/weights must be k x V")
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        if not np.allclose(weights.sum(axis=1), 1.0, rtol=0, atol=WEIGHT_SUM_TOL):
            raise ValueError("each weight row must sum to 1")
        if not (self.p > 1 and self.beta > 1):
            raise ValueError("p and beta must exceed 1")
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "weights", weights)

    @property
    def k(self) -> int:
        return self.partition.k


# -- standardisation ---------------------------------------------------------

def standardize_range(m: DataMatrix) -> tuple[DataMatrix, list[str]]:
    """Centre each feature on its mean and divide by its range.

    Constant features are removed; their names are returned alongside the
    standardised matrix so callers can report them.
    """
    m = as_matrix(m)
    y = m.values
    spread = y.max(axis=0) - y.min(axis=0)
    keep = spread > 0
    dropped = [name for name, k in zip(m.names, keep) if not k]
    if not keep.any():
        raise ValueError("no informative features: every feature is constant")
    if dropped:
        logger.warning("dropping constant features: %s", ", ".join(dropped))
    y = y[:, keep]
    out = (y - y.mean(axis=0)) / spread[keep]
    names = None if m.feature_names is None else tuple(np.asarray(m.feature_names)[keep])
    return DataMatrix(out, names), dropped


# -- dendrograms ---------------------------------------------------------------

@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    cost: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge records over ``n_leaves`` initial clusters.

    The cluster created by merge ``i`` gets id ``n_leaves + i``.
    ``leaf_sizes`` gives the cardinality of each leaf and ``leaf_labels``,
    when present, maps each entity to its leaf.
    """

    merges: tuple[Merge, ...]
    n_leaves: int
    leaf_sizes: tuple[int, ...] | None = None
    leaf_labels: np.ndarray | None = None

    def __post_init__(self):
        merges = tuple(self.merges)
        object.__setattr__(self, "merges", merges)
        if self.leaf_sizes is None:
            object.__setattr__(self, "leaf_sizes", (1,) * self.n_leaves)
        sizes = list(self.leaf_sizes)
        if len(sizes) != self.n_leaves:
            raise ValueError("leaf_sizes must have one entry per leaf")
        live = set(range(self.n_leaves))
        for i, mg in enumerate(merges):
            if mg.left not in live or mg.right not in live or mg.left == mg.right:
                raise ValueError(f"merge {i} does not join two live clusters")
            if mg.size != sizes[mg.left] + sizes[mg.right]:
                raise ValueError(f"merge {i} size does not match its children")
            live -= {mg.left, mg.right}
            live.add(self.n_leaves + i)
            sizes.append(mg.size)
        if self.leaf_labels is not None:
            ll = np.asarray(self.leaf_labels, dtype=np.int64)
            ll.setflags(write=False)
            object.__setattr__(self, "leaf_labels", ll)

    @property
    def n_clusters(self) -> int:
        """Live clusters after all recorded merges."""
        return self.n_leaves - len(self.merges)

    @property
    def costs(self) -> np.ndarray:
        return np.array([mg.cost for mg in self.merges], dtype=float)

    def linkage_matrix(self) -> np.ndarray:
        """Rows ``(left, right, cost, size)``, the usual linkage layout."""
        if not self.merges:
            return np.empty((0, 4))
        return np.array([[mg.left, mg.right, mg.cost, mg.size] for mg in self.merges],
                        dtype=float)

    def inversions(self) -> list[int]:
        """Indices of merges whose cost is lower than that of a child."""
        height = {}
        bad = []
        for i, mg in enumerate(self.merges):
            child = max(height.get(mg.left, 0.0), height.get(mg.right, 0.0))
            if mg.cost < child:
                bad.append(i)
            height[self.n_leaves + i] = mg.cost
        return bad

    def cut(self, k_target: int) -> Partition:
        return cut_dendrogram(self, k_target)

    def entity_partition(self, k_target: int | None = None) -> Partition:
        """Partition of the original entities with ``k_target`` clusters."""
        if self.leaf_labels is None:
            raise ValueError("dendrogram carries no entity-to-leaf mapping")
        k_target = self.n_clusters if k_target is None else k_target
        leaf_part = cut_dendrogram(self, k_target)
        return partition_from_labels(leaf_part.labels[self.leaf_labels])


def cut_dendrogram(d: Dendrogram, k_target: int) -> Partition:
    """Replay merges until ``k_target`` clusters remain; label the leaves."""
    if not d.n_clusters <= k_target <= d.n_leaves:
        raise ValueError(
            f"k_target={k_target} outside [{d.n_clusters}, {d.n_leaves}] for this dendrogram")
    parent = np.arange(d.n_leaves + len(d.merges))
    for i, mg in enumerate(d.merges[: d.n_leaves - k_target]):
        parent[mg.left] = parent[mg.right] = d.n_leaves + i

    def root(x):
        while parent[x] != x:
            x = parent[x]
        return x

    return partition_from_labels([root(leaf) for leaf in range(d.n_leaves)])

