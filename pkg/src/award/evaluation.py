"""Partition agreement, Silhouette width and the (p, beta) exponent grid."""
from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .agglomerative import run_algorithm
from .core import Partition, as_matrix, partition_from_labels

logger = logging.getLogger(__name__)

METRICS = ("sq_euclidean", "manhattan", "minkowski")
GRID_LO, GRID_HI = 1.1, 5.0
# full-matrix Silhouette above this many entities would not fit comfortably
_DENSE_LIMIT = 6000


def _labels(s) -> np.ndarray:
    if isinstance(s, Partition):
        return s.labels
    return partition_from_labels(s).labels


# -- adjusted Rand index -------------------------------------------------------

@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def contingency(s1, s2) -> ContingencyTable:
    a, b = _labels(s1), _labels(s2)
    if a.size != b.size:
        raise ValueError(f"partitions cover different entity counts: {a.size} vs {b.size}")
    counts = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(counts, (a, b), 1)
    return ContingencyTable(counts)


def _pairs(x) -> int:
    return sum(int(v) * (int(v) - 1) // 2 for v in np.asarray(x).ravel() if v > 1)


def adjusted_rand(s1, s2) -> float:
    """Adjusted Rand index between two partitions of the same entities.

    Pair counts are exact Python integers. When the chance-corrected
    denominator vanishes (both partitions trivial) the result is 1 for
    identical partitions and 0 otherwise.
    """
    t = contingency(s1, s2)
    total = t.n * (t.n - 1) // 2
    index = _pairs(t.counts)
    sum_a, sum_b = _pairs(t.row_sums), _pairs(t.col_sums)
    if total == 0:
        return 1.0
    # scale everything by `total` to stay in integers until the final division
    num = index * total - sum_a * sum_b
    den = (sum_a + sum_b) * total - 2 * sum_a * sum_b
    if den == 0:
        same = t.counts.shape[0] == t.counts.shape[1] and np.count_nonzero(t.counts) == t.counts.shape[0]
        return 1.0 if same else 0.0
    return 2 * num / den


# -- Silhouette ----------------------------------------------------------------

def _check_metric(metric: str, p: float | None) -> None:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    if metric == "minkowski" and (p is None or not p >= 1):
        raise ValueError("the minkowski metric needs an exponent p >= 1")


def pairwise(a: np.ndarray, b: np.ndarray, metric: str, p: float | None = None) -> np.ndarray:
    """Distances between rows; ``minkowski`` is the rooted metric."""
    _check_metric(metric, p)
    if metric == "sq_euclidean":
        return cdist(a, b, "sqeuclidean")
    if metric == "manhattan":
        return cdist(a, b, "cityblock")
    return cdist(a, b, "minkowski", p=float(p))


def _cluster_sums(d: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    return d @ onehot


def _silhouette_scores(sums: np.ndarray, labels: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    rows = np.arange(labels.size)
    own = sizes[labels]
    scores = np.zeros(labels.size)
    multi = own > 1
    a = np.zeros(labels.size)
    a[multi] = sums[rows[multi], labels[multi]] / (own[multi] - 1)
    means = sums / sizes[None, :]
    means[rows, labels] = np.inf
    b = means.min(axis=1)
    top = np.maximum(a, b)
    ok = multi & (top > 0)
    scores[ok] = (b[ok] - a[ok]) / top[ok]
    return scores


def silhouette_samples(m, s, metric: str = "sq_euclidean", p: float | None = None,
                       distances: np.ndarray | None = None) -> np.ndarray:
    """Per-entity Silhouette width; entities in singleton clusters score 0.

    ``distances`` may carry a precomputed N x N matrix for ``metric``.
    """
    labels = _labels(s)
    k = int(labels.max()) + 1
    if k < 2:
        raise ValueError("silhouette needs at least two clusters")
    if labels.size < 2:
        raise ValueError("silhouette needs at least two entities")
    sizes = np.bincount(labels, minlength=k).astype(float)
    onehot = np.zeros((labels.size, k))
    onehot[np.arange(labels.size), labels] = 1.0
    if distances is not None:
        if distances.shape != (labels.size, labels.size):
            raise ValueError("distance matrix does not match the partition")
        sums = _cluster_sums(distances, onehot)
    else:
        y = as_matrix(m).values
        if y.shape[0] != labels.size:
            raise ValueError("partition and data disagree on the number of entities")
        _check_metric(metric, p)
        sums = np.empty((labels.size, k))
        step = max(1, 4_000_000 // max(labels.size, 1))
        for lo in range(0, labels.size, step):
            sums[lo:lo + step] = _cluster_sums(pairwise(y[lo:lo + step], y, metric, p), onehot)
    return _silhouette_scores(sums, labels, sizes)


def silhouette(m, s, metric: str = "sq_euclidean", p: float | None = None,
               distances: np.ndarray | None = None) -> float:
    """Average Silhouette width of the partition under ``metric``."""
    return float(silhouette_samples(m, s, metric, p, distances).mean())


# -- exponent grid -------------------------------------------------------------

def exponent_lattice(step: float = 0.1, lo: float = GRID_LO, hi: float = GRID_HI) -> np.ndarray:
    """Exponent values from ``lo`` to ``hi``; the step must be a multiple of 0.1."""
    tenths = round(step * 10)
    if tenths < 1 or abs(tenths - step * 10) > 1e-9:
        raise ValueError("grid step must be a positive multiple of 0.1")
    a, b = round(lo * 10), round(hi * 10)
    if not round(GRID_LO * 10) <= a <= b <= round(GRID_HI * 10):
        raise ValueError(f"grid bounds must satisfy {GRID_LO} <= lo <= hi <= {GRID_HI}")
    return np.array([t / 10 for t in range(a, b + 1, tenths)])


def _on_lattice(x: float) -> bool:
    return abs(x * 10 - round(x * 10)) < 1e-9 and GRID_LO - 1e-9 <= x <= GRID_HI + 1e-9


@dataclass
class GridCell:
    p: float
    beta: float | None
    labels: np.ndarray | None = None
    silhouette: dict = field(default_factory=dict)
    ari: float | None = None
    runtime_ms: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class GridResult:
    """Every evaluated cell; ``best(metric)`` picks the highest Silhouette."""

    algorithm: str
    k_target: int
    cells: list
    metrics: tuple = ()

    def __post_init__(self):
        for c in self.cells:
            if not _on_lattice(c.p) or (c.beta is not None and not _on_lattice(c.beta)):
                raise ValueError(f"cell ({c.p}, {c.beta}) is off the exponent lattice")

    @property
    def succeeded(self) -> list:
        return [c for c in self.cells if c.ok]

    def _argmax(self, key) -> GridCell:
        good = self.succeeded
        if not good:
            raise ValueError("every grid cell failed")
        # first maximal cell in lattice order
        return max(good, key=key)

    def best(self, metric: str | None = None) -> GridCell:
        metric = metric or self.metrics[0]
        if metric not in self.metrics:
            raise ValueError(f"metric {metric!r} was not evaluated")
        return self._argmax(lambda c: c.silhouette[metric])

    def best_by_ari(self) -> GridCell:
        if any(c.ari is None for c in self.succeeded):
            raise ValueError("grid was run without ground truth")
        return self._argmax(lambda c: c.ari)

    def to_csv(self, path) -> None:
        """One row per cell: p, beta, Silhouette per metric, ARI, runtime."""
        sil_cols = ["silhouette"] if len(self.metrics) == 1 else [
            f"silhouette_{m}" for m in self.metrics]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "beta", *sil_cols, "ari_vs_truth", "runtime_ms", "error"])
            for c in self.cells:
                sil = [_fmt(c.silhouette.get(m)) for m in self.metrics]
                w.writerow([c.p, "" if c.beta is None else c.beta, *sil, _fmt(c.ari),
                            f"{c.runtime_ms:.3f}", c.error or ""])


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


class _DistanceCache:
    """Silhouette distance matrices: fixed metrics once, Minkowski per p."""

    def __init__(self, y: np.ndarray):
        self.y = y
        self.dense = y.shape[0] <= _DENSE_LIMIT
        self.store: dict = {}

    def get(self, metric: str, p: float):
        if not self.dense:
            return None
        key = (metric, p if metric == "minkowski" else None)
        if key not in self.store:
            if metric == "minkowski":
                # only one exponent is kept at a time; cells arrive p-major
                for old in [k for k in self.store if k[0] == "minkowski"]:
                    del self.store[old]
            self.store[key] = pairwise(self.y, self.y, metric, p)
        return self.store[key]


def _run_cells(y, cells, algorithm, k_target, metrics, truth):
    cache = _DistanceCache(y)
    out = []
    for p, beta in cells:
        cell = GridCell(float(p), None if beta is None else float(beta))
        t0 = time.perf_counter()
        try:
            res = run_algorithm(algorithm, y, k_target, p=cell.p, beta=cell.beta)
            cell.labels = res.partition.labels
            if res.partition.k != k_target:
                raise ValueError(f"produced {res.partition.k} clusters instead of {k_target}")
            for metric in metrics:
                cell.silhouette[metric] = silhouette(
                    y, res.partition, metric, cell.p, distances=cache.get(metric, cell.p))
            if truth is not None:
                cell.ari = adjusted_rand(res.partition, truth)
        except Exception as exc:  # a failing cell is recorded, not fatal
            cell.error = f"{type(exc).__name__}: {exc}"
            cell.silhouette = {}
            logger.info("grid cell p=%s beta=%s failed: %s", cell.p, cell.beta, cell.error)
        cell.runtime_ms = 1000 * (time.perf_counter() - t0)
        out.append(cell)
    return out


def run_grid(m, k_target: int, algorithm: str = "a_ward_pb", metrics=("manhattan",),
             truth=None, p_values=None, beta_values=None, step: float = 0.1,
             jobs: int = 1) -> GridResult:
    """Evaluate ``algorithm`` at every lattice point and score each cut.

    ``ward_p`` ignores ``beta_values``. Cells run in p-major order; with
    ``jobs > 1`` contiguous blocks of p values go to worker processes and
    results are reassembled in lattice order.
    """
    if algorithm not in ("a_ward_pb", "ward_p"):
        raise ValueError("grid search supports a_ward_pb and ward_p")
    if k_target < 2:
        raise ValueError("grid search needs k_target >= 2 for the Silhouette")
    metrics = tuple(metrics)
    for metric in metrics:
        _check_metric(metric, 2.0)
    y = as_matrix(m).values
    truth_labels = None if truth is None else _labels(truth)
    if truth_labels is not None and truth_labels.size != y.shape[0]:
        raise ValueError("truth does not cover the data")
    ps = exponent_lattice(step) if p_values is None else np.asarray(p_values, dtype=float)
    if algorithm == "ward_p":
        bs = [None]
    else:
        bs = exponent_lattice(step) if beta_values is None else list(np.asarray(beta_values, float))
    blocks = [[(p, b) for b in bs] for p in ps]
    if jobs > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_cells, y, blk, algorithm, k_target, metrics, truth_labels)
                       for blk in blocks]
            cells = [c for f in futures for c in f.result()]
    else:
        cells = _run_cells(y, [c for blk in blocks for c in blk], algorithm, k_target,
                           metrics, truth_labels)
    result = GridResult(algorithm, int(k_target), cells, metrics)
    if not result.succeeded:
        raise ValueError("every grid cell failed")
    return result


def grid_search(m, k_target: int, algorithm: str = "a_ward_pb", metric: str = "manhattan",
                **kwargs) -> GridResult:
    """Grid over exponents scored by one Silhouette metric; see ``GridResult.best``."""
    return run_grid(m, k_target, algorithm, metrics=(metric,), **kwargs)


def best_ari_over_grid(m, truth, k_target: int, algorithm: str = "a_ward_pb",
                       **kwargs) -> float:
    """Highest ARI against ``truth`` over all successful grid cells."""
    kwargs.setdefault("metrics", ())
    res = run_grid(m, k_target, algorithm, truth=truth, **kwargs)
    return float(res.best_by_ari().ari)


def ari_excluding(s1, s2, exclude: np.ndarray) -> float:
    """ARI over the entities not flagged in the boolean mask ``exclude``."""
    keep = ~np.asarray(exclude, dtype=bool)
    a, b = _labels(s1), _labels(s2)
    if keep.size != a.size or a.size != b.size:
        raise ValueError("mask and partitions must cover the same entities")
    return adjusted_rand(partition_from_labels(a[keep]), partition_from_labels(b[keep]))
