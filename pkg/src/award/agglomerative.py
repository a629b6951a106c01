"""Agglomerative merging: Ward, A-Ward, Ward_p and A-Ward_pbeta.

Both engines keep the full cluster-to-cluster cost matrix and a cached
nearest neighbour per row, so each round needs O(K) work plus a rescan of the
rows whose neighbour was consumed. Ward updates the matrix with the
Lance-Williams recurrence. The weighted variants recompute only the merged
cluster's row: the other clusters keep their members, centres and weights,
so their mutual costs do not change.

Ties are broken towards the lexicographically smallest ``(left, right)``
pair of cluster ids.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .core import ClusterState, Dendrogram, Merge, Partition, as_matrix, partition_from_labels
from .minkowski import CENTER_TOL, _center_1d, check_exponent
from .partitional import anomalous_init_pb, ik_means, imwk_means_pb


# -- pairwise costs ------------------------------------------------------------

def ward_cost(na: int, ca, nb_: int, cb) -> float:
    """``na*nb/(na+nb) * sum_v (ca_v - cb_v)**2``."""
    diff = np.asarray(ca, dtype=float) - np.asarray(cb, dtype=float)
    return na * nb_ / (na + nb_) * float(diff @ diff)


def ward_pb_cost(na: int, ca, wa, nb_: int, cb, wb, p: float, beta: float) -> float:
    """``na*nb/(na+nb) * sum_v ((wa_v + wb_v)/2)**beta * |ca_v - cb_v|**p``."""
    ca, wa, cb, wb = (np.asarray(a, dtype=float) for a in (ca, wa, cb, wb))
    w = 0.5 * (wa + wb)
    return na * nb_ / (na + nb_) * float(np.sum(w ** beta * np.abs(ca - cb) ** p))


def ward_p_cost(na: int, ca, wa, nb_: int, cb, wb, p: float) -> float:
    """Ward_p dissimilarity: the weighted cost with weight exponent ``p``."""
    return ward_pb_cost(na, ca, wa, nb_, cb, wb, p, p)


# -- shared kernels ------------------------------------------------------------

@nb.njit(cache=True)
def _row_nn(cost, live, ids, i):
    best = np.inf
    bj = -1
    for j in range(cost.shape[0]):
        if live[j] and j != i:
            d = cost[i, j]
            if bj < 0 or d < best or (d == best and ids[j] < ids[bj]):
                best = d
                bj = j
    return bj, best


@nb.njit(cache=True)
def _best_pair(nn, nnd, live, ids):
    best = np.inf
    bi = -1
    blo = 0
    bhi = 0
    for i in range(nn.shape[0]):
        if live[i] and nn[i] >= 0:
            a = ids[i]
            b = ids[nn[i]]
            lo = min(a, b)
            hi = max(a, b)
            d = nnd[i]
            if bi < 0 or d < best or (d == best and (lo < blo or (lo == blo and hi < bhi))):
                best = d
                bi = i
                blo = lo
                bhi = hi
    return bi, nn[bi]


@nb.njit(cache=True)
def _init_nn(cost, live, ids, nn, nnd):
    for i in range(cost.shape[0]):
        if live[i]:
            nn[i], nnd[i] = _row_nn(cost, live, ids, i)


@nb.njit(cache=True)
def _refresh_nn(cost, live, ids, nn, nnd, a, b):
    nn[a], nnd[a] = _row_nn(cost, live, ids, a)
    for k in range(cost.shape[0]):
        if live[k] and k != a:
            if nn[k] == a or nn[k] == b:
                nn[k], nnd[k] = _row_nn(cost, live, ids, k)
            elif cost[k, a] < nnd[k]:
                nn[k] = a
                nnd[k] = cost[k, a]


@nb.njit(cache=True)
def _ward_cost_matrix(centroids, sizes):
    k, n_feat = centroids.shape
    cost = np.empty((k, k))
    for i in range(k):
        cost[i, i] = np.inf
        for j in range(i + 1, k):
            acc = 0.0
            for v in range(n_feat):
                d = centroids[i, v] - centroids[j, v]
                acc += d * d
            c = sizes[i] * sizes[j] / (sizes[i] + sizes[j]) * acc
            cost[i, j] = c
            cost[j, i] = c
    return cost


@nb.njit(cache=True)
def _ward_lw(cost, sizes, k_target, left, right, costs, new_sizes):
    k0 = cost.shape[0]
    live = np.ones(k0, dtype=np.bool_)
    ids = np.arange(k0)
    nn = np.full(k0, -1)
    nnd = np.full(k0, np.inf)
    _init_nn(cost, live, ids, nn, nnd)
    count = k0
    m = 0
    while count > k_target:
        i, j = _best_pair(nn, nnd, live, ids)
        a = min(i, j)
        b = max(i, j)
        na = sizes[a]
        nb_ = sizes[b]
        dab = cost[a, b]
        left[m] = min(ids[a], ids[b])
        right[m] = max(ids[a], ids[b])
        costs[m] = dab
        new_sizes[m] = na + nb_
        for k in range(k0):
            if live[k] and k != a and k != b:
                nk = sizes[k]
                d = ((na + nk) * cost[k, a] + (nb_ + nk) * cost[k, b] - nk * dab) / (na + nb_ + nk)
                cost[k, a] = d
                cost[a, k] = d
        live[b] = False
        sizes[a] = na + nb_
        ids[a] = k0 + m
        m += 1
        count -= 1
        _refresh_nn(cost, live, ids, nn, nnd, a, b)
    return m


@nb.njit(cache=True)
def _pb_pair_cost(ca, wa, na, cb, wb, nb_, p, beta):
    acc = 0.0
    for v in range(ca.shape[0]):
        w = 0.5 * (wa[v] + wb[v])
        if w > 0.0:
            acc += w ** beta * abs(ca[v] - cb[v]) ** p
    return na * nb_ / (na + nb_) * acc


@nb.njit(cache=True)
def _weights_row(disp, p, out):
    n_feat = disp.shape[0]
    n_zero = 0
    dmin = np.inf
    for v in range(n_feat):
        if disp[v] == 0.0:
            n_zero += 1
        elif disp[v] < dmin:
            dmin = disp[v]
    if n_zero > 0:
        for v in range(n_feat):
            out[v] = 1.0 / n_zero if disp[v] == 0.0 else 0.0
        return
    e = 1.0 / (p - 1.0)
    total = 0.0
    for v in range(n_feat):
        out[v] = (dmin / disp[v]) ** e
        total += out[v]
    for v in range(n_feat):
        out[v] /= total


@nb.njit(cache=True)
def _ward_pb(y, slot_of, centroids, weights, sizes, p, beta, k_target, tol,
             left, right, costs, new_sizes):
    k0, n_feat = centroids.shape
    n = y.shape[0]
    cost = np.empty((k0, k0))
    for i in range(k0):
        cost[i, i] = np.inf
        for j in range(i + 1, k0):
            c = _pb_pair_cost(centroids[i], weights[i], sizes[i],
                              centroids[j], weights[j], sizes[j], p, beta)
            cost[i, j] = c
            cost[j, i] = c
    live = np.ones(k0, dtype=np.bool_)
    ids = np.arange(k0)
    nn = np.full(k0, -1)
    nnd = np.full(k0, np.inf)
    _init_nn(cost, live, ids, nn, nnd)
    members = np.empty(n, dtype=np.int64)
    buf = np.empty(n)
    disp = np.empty(n_feat)
    count = k0
    m = 0
    while count > k_target:
        i, j = _best_pair(nn, nnd, live, ids)
        a = min(i, j)
        b = max(i, j)
        left[m] = min(ids[a], ids[b])
        right[m] = max(ids[a], ids[b])
        costs[m] = cost[a, b]
        na = sizes[a]
        nb_ = sizes[b]
        new_sizes[m] = na + nb_
        cnt = 0
        for e in range(n):
            if slot_of[e] == b:
                slot_of[e] = a
            if slot_of[e] == a:
                members[cnt] = e
                cnt += 1
        for v in range(n_feat):
            warm = (na * centroids[a, v] + nb_ * centroids[b, v]) / (na + nb_)
            if p == 2.0:
                s = 0.0
                for t in range(cnt):
                    s += y[members[t], v]
                c = s / cnt
            else:
                for t in range(cnt):
                    buf[t] = y[members[t], v]
                c = _center_1d(buf, cnt, p, warm, tol)
            centroids[a, v] = c
            acc = 0.0
            for t in range(cnt):
                acc += abs(y[members[t], v] - c) ** p
            disp[v] = acc
        _weights_row(disp, p, weights[a])
        sizes[a] = na + nb_
        live[b] = False
        ids[a] = k0 + m
        for k in range(k0):
            if live[k] and k != a:
                c = _pb_pair_cost(centroids[a], weights[a], sizes[a],
                                  centroids[k], weights[k], sizes[k], p, beta)
                cost[a, k] = c
                cost[k, a] = c
        m += 1
        count -= 1
        _refresh_nn(cost, live, ids, nn, nnd, a, b)
    return m


# -- results -------------------------------------------------------------------

@dataclass(frozen=True)
class AgglomerationResult:
    """Dendrogram plus what produced its leaves.

    ``partition`` is the entity partition at ``k_target``; ``init`` holds the
    initialiser output for the A-variants (``AnomalousInitResult`` for A-Ward,
    the ``ClusterState`` from imwk-means for A-Ward_pbeta). ``state`` holds the
    centroids and weights of the final clusters for the weighted variants.
    """

    dendrogram: Dendrogram
    partition: Partition
    k_target: int
    init: object = None
    state: ClusterState | None = None
    timings: dict = field(default_factory=dict)
    mini_trees: dict | None = None

    @property
    def k_star(self) -> int:
        return self.dendrogram.n_leaves

    @property
    def n_merges(self) -> int:
        return len(self.dendrogram.merges)

    def labels(self, k: int | None = None) -> np.ndarray:
        return self.dendrogram.entity_partition(k).labels


def _check_k(k_target: int, k0: int, algorithm: str) -> int:
    k_target = int(k_target)
    if k_target < 1:
        raise ValueError("k_target must be at least 1")
    if k_target > k0:
        if algorithm.startswith("a_"):
            raise ValueError(
                f"k_target={k_target} exceeds the {k0} clusters found by the anomalous-pattern "
                "initialisation; lower k_target or use the plain variant")
        raise ValueError(f"k_target={k_target} exceeds the number of entities ({k0})")
    return k_target


def _merges(m, left, right, costs, sizes) -> tuple[Merge, ...]:
    return tuple(Merge(int(left[i]), int(right[i]), float(costs[i]), int(sizes[i]))
                 for i in range(m))


def ward_from_leaves(centroids, sizes, k_target: int, leaf_labels=None) -> Dendrogram:
    """Ward merging from arbitrary leaves given by their means and sizes."""
    centroids = np.ascontiguousarray(centroids, dtype=float)
    sizes = np.asarray(sizes, dtype=float).copy()
    k0 = centroids.shape[0]
    cost = _ward_cost_matrix(centroids, sizes)
    n_out = max(k0 - k_target, 0)
    left = np.empty(n_out, dtype=np.int64)
    right = np.empty(n_out, dtype=np.int64)
    costs = np.empty(n_out)
    new_sizes = np.empty(n_out)
    leaf_sizes = tuple(int(s) for s in sizes)
    m = _ward_lw(cost, sizes, k_target, left, right, costs, new_sizes)
    return Dendrogram(_merges(m, left, right, costs, new_sizes), k0, leaf_sizes, leaf_labels)


def ward(m, k_target: int = 1) -> AgglomerationResult:
    """Classical Ward from singletons down to ``k_target`` clusters."""
    m = as_matrix(m)
    k_target = _check_k(k_target, m.n_entities, "ward")
    t0 = time.perf_counter()
    d = ward_from_leaves(m.values, np.ones(m.n_entities), k_target,
                         leaf_labels=np.arange(m.n_entities))
    t1 = time.perf_counter()
    return AgglomerationResult(d, d.entity_partition(k_target), k_target,
                               timings={"init_s": 0.0, "agglomeration_s": t1 - t0})


def a_ward(m, k_target: int, theta: int = 1, mini_trees: bool = False) -> AgglomerationResult:
    """Ward started from the ik-means partition instead of singletons.

    With ``mini_trees`` a Ward tree is also grown inside every initial
    cluster, keyed by leaf id.
    """
    m = as_matrix(m)
    t0 = time.perf_counter()
    init = ik_means(m, theta=theta)
    t1 = time.perf_counter()
    k_target = _check_k(k_target, init.k_star, "a_ward")
    d = ward_from_leaves(init.centroids, init.sizes, k_target,
                         leaf_labels=init.partition.labels)
    t2 = time.perf_counter()
    trees = None
    if mini_trees:
        trees = {}
        for leaf, idx in enumerate(init.partition.clusters()):
            sub = ward_from_leaves(m.values[idx], np.ones(idx.size), 1,
                                   leaf_labels=np.arange(idx.size))
            trees[leaf] = (idx, sub)
    return AgglomerationResult(d, d.entity_partition(k_target), k_target, init=init,
                               timings={"init_s": t1 - t0, "agglomeration_s": t2 - t1},
                               mini_trees=trees)


def _weighted_agglomeration(y, leaf_labels, centroids, weights, sizes, p, beta, k_target):
    slot_of = np.array(leaf_labels, dtype=np.int64)
    centroids = np.array(centroids, dtype=float)
    weights = np.array(weights, dtype=float)
    sizes = np.asarray(sizes, dtype=float).copy()
    k0 = centroids.shape[0]
    leaf_sizes = tuple(int(s) for s in sizes)
    n_out = max(k0 - k_target, 0)
    left = np.empty(n_out, dtype=np.int64)
    right = np.empty(n_out, dtype=np.int64)
    costs = np.empty(n_out)
    new_sizes = np.empty(n_out)
    m = _ward_pb(np.ascontiguousarray(y, dtype=float), slot_of, centroids, weights, sizes,
                 float(p), float(beta), k_target, CENTER_TOL, left, right, costs, new_sizes)
    d = Dendrogram(_merges(m, left, right, costs, new_sizes), k0, leaf_sizes,
                   np.asarray(leaf_labels, dtype=np.int64))
    part = partition_from_labels(slot_of)
    _, first = np.unique(slot_of, return_index=True)
    slots = slot_of[np.sort(first)]
    state = ClusterState(part, centroids[slots], weights[slots], p, beta)
    return d, part, state


def ward_p(m, p: float, k_target: int = 1) -> AgglomerationResult:
    """Ward_p: weighted Minkowski Ward from singletons with uniform weights."""
    m = as_matrix(m)
    p = check_exponent(p)
    k_target = _check_k(k_target, m.n_entities, "ward_p")
    n, n_feat = m.values.shape
    t0 = time.perf_counter()
    d, part, state = _weighted_agglomeration(
        m.values, np.arange(n), m.values, np.full((n, n_feat), 1.0 / n_feat), np.ones(n),
        p, p, k_target)
    t1 = time.perf_counter()
    return AgglomerationResult(d, part, k_target, state=state,
                               timings={"init_s": 0.0, "agglomeration_s": t1 - t0})


def a_ward_pb(m, p: float, beta: float, k_target: int) -> AgglomerationResult:
    """A-Ward_pbeta: anomalous-pattern initialisation, imwk-means_pbeta, then
    weighted Ward merging with weight exponent ``beta``."""
    m = as_matrix(m)
    p = check_exponent(p)
    beta = check_exponent(beta, "beta")
    t0 = time.perf_counter()
    seeds = anomalous_init_pb(m, p, beta)
    state0 = imwk_means_pb(m, seeds, p, beta)
    t1 = time.perf_counter()
    k_target = _check_k(k_target, state0.k, "a_ward_pb")
    d, part, state = _weighted_agglomeration(
        m.values, state0.partition.labels, state0.centroids, state0.weights,
        state0.partition.sizes, p, beta, k_target)
    t2 = time.perf_counter()
    return AgglomerationResult(d, part, k_target, init=state0, state=state,
                               timings={"init_s": t1 - t0, "agglomeration_s": t2 - t1,
                                        "anomalous_k": seeds.k_star})


ALGORITHMS = ("ward", "a_ward", "ward_p", "a_ward_pb")


def run_algorithm(algorithm: str, m, k_target: int, p: float | None = None,
                  beta: float | None = None, theta: int = 1) -> AgglomerationResult:
    """Dispatch by name, checking which exponents each algorithm accepts."""
    if algorithm == "ward":
        if p is not None or beta is not None:
            raise ValueError("ward takes no p or beta")
        return ward(m, k_target)
    if algorithm == "a_ward":
        if p is not None or beta is not None:
            raise ValueError("a_ward takes no p or beta")
        return a_ward(m, k_target, theta=theta)
    if algorithm == "ward_p":
        if p is None or beta is not None:
            raise ValueError("ward_p takes p only")
        return ward_p(m, p, k_target)
    if algorithm == "a_ward_pb":
        if p is None or beta is None:
            raise ValueError("a_ward_pb needs both p and beta")
        return a_ward_pb(m, p, beta, k_target)
    raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
