"""k-means, anomalous-pattern extraction and weighted Minkowski k-means.

These produce the initial partitions that the A-variants of Ward start
merging from.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numba as nb
import numpy as np

from .core import ClusterState, ConvergenceError, Partition, as_matrix, compact_labels
from .minkowski import (
    assign_pb,
    check_exponent,
    dispersions,
    distances_to_center_pb,
    grouped_minkowski_centers,
    minkowski_center,
    update_weights,
)

logger = logging.getLogger(__name__)

MAX_ITER = 10_000


@dataclass(frozen=True)
class KMeansResult:
    partition: Partition
    centroids: np.ndarray
    n_iter: int
    dropped: tuple[int, ...] = ()
    history: tuple[float, ...] = ()

    def __iter__(self):
        # unpacks as (partition, centroids)
        return iter((self.partition, self.centroids))


@dataclass(frozen=True)
class AnomalousInitResult:
    """Outcome of anomalous-pattern extraction.

    ``k_star`` is the number of clusters handed to the next stage and
    ``sizes`` their cardinalities. ``extraction_sizes`` lists every
    anomalous cluster in extraction order, including ones discarded by the
    ``theta`` filter.
    """

    centroids: np.ndarray
    weights: np.ndarray
    k_star: int
    sizes: tuple[int, ...]
    partition: Partition
    extraction_sizes: tuple[int, ...] = ()
    theta: int = 1
    n_saved: int = 0


def _sq_dist_to(y: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = y - c
    return np.einsum("ij,ij->i", diff, diff)


@nb.njit(cache=True, fastmath=True)
def _assign_sq(y, centroids, labels):
    # nearest centroid, ties to the lower index
    n, n_feat = y.shape
    k_count = centroids.shape[0]
    dist = np.empty(k_count)
    for i in range(n):
        for k in range(k_count):
            acc = 0.0
            for v in range(n_feat):
                d = y[i, v] - centroids[k, v]
                acc += d * d
            dist[k] = acc
        labels[i] = np.argmin(dist)


@nb.njit(cache=True)
def _cluster_means(y, labels, k):
    n, n_feat = y.shape
    out = np.zeros((k, n_feat))
    counts = np.zeros(k)
    for i in range(n):
        counts[labels[i]] += 1.0
        for v in range(n_feat):
            out[labels[i], v] += y[i, v]
    for c in range(k):
        for v in range(n_feat):
            out[c, v] /= counts[c]
    return out


@nb.njit(cache=True)
def _criterion(y, labels, centroids):
    acc = 0.0
    for i in range(y.shape[0]):
        for v in range(y.shape[1]):
            d = y[i, v] - centroids[labels[i], v]
            acc += d * d
    return acc


def kmeans_criterion(y: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    """Within-cluster sum of squared distances to the centroids."""
    return float(_criterion(np.ascontiguousarray(y, dtype=float),
                            np.asarray(labels, dtype=np.int64), centroids))


def kmeans(m, init_centroids, max_iter: int = MAX_ITER) -> KMeansResult:
    """Batch k-means from the given centroids (squared Euclidean).

    Alternates assignment and mean update until no label changes. A cluster
    left empty after an assignment is dropped, never re-seeded.
    """
    m = as_matrix(m)
    y = m.values
    centroids = np.array(init_centroids, dtype=float, ndmin=2)
    if centroids.shape[1] != m.n_features:
        raise ValueError("initial centroids have the wrong number of features")
    if centroids.shape[0] > m.n_entities:
        raise ValueError("more centroids than entities")
    ids = np.arange(centroids.shape[0])
    labels = None
    dropped: list[int] = []
    history: list[float] = []
    y = np.ascontiguousarray(y)
    new = np.empty(m.n_entities, dtype=np.int64)
    for it in range(1, max_iter + 1):
        _assign_sq(y, centroids, new)
        if labels is not None and np.array_equal(new, labels):
            return KMeansResult(Partition(labels), centroids, it, tuple(dropped), tuple(history))
        k = centroids.shape[0]
        new, used = compact_labels(new, k)
        if used.size < k:
            gone = np.setdiff1d(np.arange(k), used)
            dropped.extend(int(g) for g in ids[gone])
            logger.info("k-means dropped %d empty cluster(s)", gone.size)
            ids = ids[used]
        labels = new
        new = np.empty_like(labels)
        centroids = _cluster_means(y, labels, used.size)
        history.append(kmeans_criterion(y, labels, centroids))
    raise ConvergenceError(f"k-means did not converge in {max_iter} iterations")


def _extract_anomalous(y: np.ndarray, remaining: np.ndarray, dist_to_grand, dist_to_tentative,
                       update_tentative, max_iter: int):
    """Grow one anomalous cluster among ``remaining`` rows.

    ``dist_to_tentative(rows, state)`` measures against the tentative centre
    carried in ``state``; ``update_tentative(rows)`` returns a new state.
    Returns the boolean membership over ``remaining`` and the final state.
    """
    r = y[remaining]
    d_grand = dist_to_grand(r)
    seed = int(np.argmax(d_grand))
    state = update_tentative(r[seed:seed + 1])
    member = np.zeros(r.shape[0], dtype=bool)
    for _ in range(max_iter):
        new = dist_to_tentative(r, state) < d_grand
        if not new.any():
            if not member.any():
                # every remaining entity sits on the grand centre
                new[:] = True
                return new, update_tentative(r)
            return member, state
        if np.array_equal(new, member):
            return member, state
        member = new
        state = update_tentative(r[member])
    raise ConvergenceError(f"anomalous cluster did not settle in {max_iter} iterations")


def ik_means(m, theta: int = 1, max_iter: int = MAX_ITER) -> AnomalousInitResult:
    """Intelligent k-means: extract anomalous clusters one by one against the
    fixed grand mean, keep those with at least ``theta`` entities, then run
    k-means on all the data from the kept centroids."""
    m = as_matrix(m)
    if theta < 1:
        raise ValueError("theta must be at least 1")
    y = m.values
    grand = y.mean(axis=0)
    remaining = np.arange(m.n_entities)
    saved: list[np.ndarray] = []
    extracted: list[int] = []
    while remaining.size:
        member, centre = _extract_anomalous(
            y, remaining,
            dist_to_grand=lambda r: _sq_dist_to(r, grand),
            dist_to_tentative=_sq_dist_to,
            update_tentative=lambda pts: pts.mean(axis=0),
            max_iter=max_iter)
        extracted.append(int(member.sum()))
        if member.sum() >= theta:
            saved.append(centre)
        remaining = remaining[~member]
    if not saved:
        raise ValueError(f"no anomalous clusters retained with theta={theta}")
    km = kmeans(m, np.vstack(saved), max_iter=max_iter)
    k = km.partition.k
    return AnomalousInitResult(
        centroids=km.centroids,
        weights=np.full((k, m.n_features), 1.0 / m.n_features),
        k_star=k,
        sizes=tuple(int(s) for s in km.partition.sizes),
        partition=km.partition,
        extraction_sizes=tuple(extracted),
        theta=theta,
        n_saved=len(saved),
    )


def anomalous_init_pb(m, p: float, beta: float, max_iter: int = MAX_ITER) -> AnomalousInitResult:
    """Anomalous-pattern extraction under the weighted Minkowski distance.

    The grand centre is the Minkowski centre of all data and stays fixed,
    always measured with uniform weights. A tentative cluster starts from
    uniform weights too; after each centre update its weights are
    re-estimated from its own dispersions. Every extracted cluster is kept
    (theta = 1).
    """
    m = as_matrix(m)
    p = check_exponent(p)
    beta = check_exponent(beta, "beta")
    y = m.values
    n_feat = m.n_features
    uniform = np.full(n_feat, 1.0 / n_feat)
    grand = minkowski_center(y, p)
    remaining = np.arange(m.n_entities)
    labels = np.empty(m.n_entities, dtype=np.int64)
    centres, weights, sizes = [], [], []
    while remaining.size:
        member, c, w = _extract_pb(y[remaining], grand, uniform, p, beta, max_iter)
        labels[remaining[member]] = len(centres)
        centres.append(c)
        weights.append(w)
        sizes.append(int(member.sum()))
        remaining = remaining[~member]
    return AnomalousInitResult(
        centroids=np.vstack(centres),
        weights=np.vstack(weights),
        k_star=len(centres),
        sizes=tuple(sizes),
        partition=Partition(labels),
        extraction_sizes=tuple(sizes),
        theta=1,
        n_saved=len(centres),
    )


def _row_weights(pts, c, p):
    if pts.shape[0] == 0:
        return np.full(c.size, 1.0 / c.size)
    return update_weights(np.sum(np.abs(pts - c) ** p, axis=0)[None, :], p)[0]


def _extract_pb(r, grand, uniform, p, beta, max_iter):
    # the grand centre keeps uniform weights throughout
    d_grand = distances_to_center_pb(r, grand, uniform, p, beta)
    seed = int(np.argmax(d_grand))
    c, w = r[seed].copy(), uniform
    member = np.zeros(r.shape[0], dtype=bool)
    seen = set()
    for _ in range(max_iter):
        new = distances_to_center_pb(r, c, w, p, beta) < d_grand
        if not new.any():
            if not member.any():
                new[:] = True
                return new, minkowski_center(r, p), _row_weights(r, minkowski_center(r, p), p)
            return member, c, w
        if np.array_equal(new, member):
            return member, c, w
        key = new.tobytes()
        if key in seen:
            logger.warning("anomalous extraction revisited a membership; stopping there")
            return member, c, w
        seen.add(key)
        member = new
        c = minkowski_center(r[member], p, init=c)
        w = _row_weights(r[member], c, p)
    raise ConvergenceError(f"anomalous cluster did not settle in {max_iter} iterations")


def imwk_objective(y, labels, centroids, weights, p, beta) -> float:
    """``sum_k sum_{i in S_k} sum_v w_kv**beta |y_iv - c_kv|**p``."""
    wb = weights[labels] ** beta
    return float(np.sum(wb * np.abs(y - centroids[labels]) ** p))


def imwk_means_pb(m, init, p: float, beta: float, max_iter: int = MAX_ITER,
                  trace: list | None = None) -> ClusterState:
    """Weighted Minkowski k-means with separate weight exponent ``beta``.

    Starts from the centroids and weights of ``init`` (an
    ``AnomalousInitResult`` or ``ClusterState``). Each pass assigns entities by
    the weighted distance, moves centroids to Minkowski centres and
    recomputes weights from dispersions, until the assignment repeats. With
    ``beta != p`` the weight step need not lower the objective and the
    iteration can cycle; it then stops at the first revisited partition.
    If ``trace`` is a list, the objective after each assignment and after
    each weight update is appended to it as ``(stage, value)``.
    """
    m = as_matrix(m)
    p = check_exponent(p)
    beta = check_exponent(beta, "beta")
    y = m.values
    centroids = np.array(init.centroids, dtype=float)
    weights = np.array(init.weights, dtype=float)
    if centroids.shape[0] < 1:
        raise ValueError("initialisation has no centroids")
    ids = np.arange(centroids.shape[0])
    labels = None
    hint = getattr(getattr(init, "partition", None), "labels", None)
    if hint is not None and hint.size != y.shape[0]:
        hint = None
    dropped: list[int] = []
    seen: set[bytes] = set()
    for it in range(1, max_iter + 1):
        new, _ = assign_pb(y, centroids, weights, p, beta, hint=hint)
        if trace is not None:
            trace.append(("assign", imwk_objective(y, new, centroids, weights, p, beta)))
        if labels is not None and np.array_equal(new, labels):
            return ClusterState(Partition(labels), centroids, weights, p, beta,
                                n_iter=it, dropped=tuple(dropped))
        k = centroids.shape[0]
        new, used = compact_labels(new, k)
        key = new.tobytes()
        if key in seen:
            # centres and weights are functions of the labels, so this repeats forever
            logger.warning("imwk-means revisited a partition; stopping at iteration %d", it)
            return ClusterState(Partition(labels), centroids, weights, p, beta,
                                n_iter=it, dropped=tuple(dropped))
        seen.add(key)
        if used.size < k:
            gone = np.setdiff1d(np.arange(k), used)
            dropped.extend(int(g) for g in ids[gone])
            logger.info("imwk-means dropped %d empty cluster(s)", gone.size)
            ids = ids[used]
            centroids = centroids[used]
        labels = hint = new
        k = used.size
        centroids = grouped_minkowski_centers(y, labels, k, p, init=centroids)
        weights = update_weights(dispersions(y, labels, centroids, p))
        if trace is not None:
            trace.append(("update", imwk_objective(y, labels, centroids, weights, p, beta)))
    raise ConvergenceError(f"imwk-means did not converge in {max_iter} iterations")
