"""Minkowski distances, centres, dispersions and feature weights.

All clustering criteria use the p-th power of the Minkowski distance (no
root). The weighted form is ``sum_v w_v**beta * |x_v - c_v|**p``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

CENTER_TOL = 1e-10


def check_exponent(value: float, name: str = "p") -> float:
    value = float(value)
    if not value > 1 or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite number greater than 1, got {value}")
    return value


def minkowski_power_distance(x, y, p: float) -> float:
    """``sum_v |x_v - y_v|**p``."""
    p = check_exponent(p)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return float(np.sum(np.abs(x - y) ** p))


def weighted_distance_pb(x, c, w, p: float, beta: float) -> float:
    """``sum_v w_v**beta * |x_v - c_v|**p``."""
    p = check_exponent(p)
    beta = check_exponent(beta, "beta")
    x, c, w = (np.asarray(a, dtype=float) for a in (x, c, w))
    if not x.shape == c.shape == w.shape:
        raise ValueError("x, c and w must have equal lengths")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {w.sum()}")
    return float(np.sum(w ** beta * np.abs(x - c) ** p))


# -- Minkowski centre ----------------------------------------------------------

@nb.njit(cache=True)
def _slope(x, n, c, p):
    """Return ``g = sum sign(x-c)|x-c|^(p-1)`` (``-f'(c)/p``) and the curvature
    sum ``h = sum |x-c|^(p-2)``; ``h`` is inf when p < 2 and c hits a point."""
    g = 0.0
    h = 0.0
    for i in range(n):
        d = x[i] - c
        ad = abs(d)
        if ad > 0.0:
            t = ad ** (p - 2.0)
            g += d * t
            h += t
        elif p < 2.0:
            h = np.inf
        elif p == 2.0:
            h += 1.0
    return g, h


@nb.njit(cache=True)
def _center_1d(x, n, p, c0, tol):
    lo = x[0]
    hi = x[0]
    for i in range(1, n):
        if x[i] < lo:
            lo = x[i]
        elif x[i] > hi:
            hi = x[i]
    if hi == lo:
        return lo
    eps = tol * max(1.0, hi - lo)
    c = min(max(c0, lo), hi)
    for _ in range(500):
        g, h = _slope(x, n, c, p)
        if g > 0.0:
            lo = c
        elif g < 0.0:
            hi = c
        else:
            return c
        if hi - lo <= eps:
            return 0.5 * (lo + hi)
        cn = 0.5 * (lo + hi)
        if np.isfinite(h) and h > 0.0:
            step = g / ((p - 1.0) * h)
            trial = c + step
            if lo < trial < hi:
                cn = trial
                if abs(step) <= eps:
                    # confirm the root lies within eps of the Newton point
                    ga, _ = _slope(x, n, max(cn - eps, lo), p)
                    gb, _ = _slope(x, n, min(cn + eps, hi), p)
                    if ga >= 0.0:
                        lo = max(cn - eps, lo)
                    if gb <= 0.0:
                        hi = min(cn + eps, hi)
                    if hi - lo <= 2.0 * eps + 1e-300:
                        return 0.5 * (lo + hi)
                    cn = 0.5 * (lo + hi)
        c = cn
    return c


@nb.njit(cache=True)
def _grouped_centers(y, order, offsets, p, init, out, tol):
    k_count = offsets.size - 1
    n_feat = y.shape[1]
    buf = np.empty(y.shape[0])
    for k in range(k_count):
        s = offsets[k]
        e = offsets[k + 1]
        n = e - s
        for v in range(n_feat):
            for j in range(n):
                buf[j] = y[order[s + j], v]
            out[k, v] = _center_1d(buf, n, p, init[k, v], tol)


def _group_layout(labels: np.ndarray, k: int):
    order = np.argsort(labels, kind="stable")
    counts = np.bincount(labels, minlength=k)
    offsets = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return order, offsets, counts


def grouped_minkowski_centers(y: np.ndarray, labels: np.ndarray, k: int, p: float,
                              init: np.ndarray | None = None) -> np.ndarray:
    """Minkowski centre of every cluster in ``labels`` (all must be non-empty)."""
    y = np.ascontiguousarray(y, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    order, offsets, counts = _group_layout(labels, k)
    if np.any(counts == 0):
        raise ValueError("every cluster needs at least one entity")
    if p == 2.0:
        sums = np.zeros((k, y.shape[1]))
        np.add.at(sums, labels, y)
        lo = np.full((k, y.shape[1]), np.inf)
        hi = np.full((k, y.shape[1]), -np.inf)
        np.minimum.at(lo, labels, y)
        np.maximum.at(hi, labels, y)
        # rounding can push a mean of near-equal values just outside their range
        return np.clip(sums / counts[:, None], lo, hi)
    if init is None:
        init = np.zeros((k, y.shape[1]))
        np.add.at(init, labels, y)
        init /= counts[:, None]
    out = np.empty((k, y.shape[1]))
    _grouped_centers(y, order, offsets, float(p), np.ascontiguousarray(init, dtype=float),
                     out, CENTER_TOL)
    return out


def minkowski_center(points, p: float, init=None) -> np.ndarray:
    """Component-wise minimiser of ``sum_i |y_iv - c_v|**p``.

    The objective is separable and strictly convex for ``p > 1``, so each
    coordinate is solved on ``[min, max]`` of its values by a bracketed Newton
    iteration with bisection fallback.
    """
    p = check_exponent(p)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise ValueError("cannot take the centre of an empty point set")
    init = None if init is None else np.atleast_2d(np.asarray(init, dtype=float))
    return grouped_minkowski_centers(pts, np.zeros(pts.shape[0], dtype=np.int64), 1, p, init)[0]


# -- dispersions and weights ---------------------------------------------------

@dataclass(frozen=True)
class Dispersions:
    """``d[k, v] = sum_{i in S_k} |y_iv - c_kv|**p``."""

    d: np.ndarray
    p: float


@nb.njit(cache=True)
def _grouped_dispersions(y, labels, centroids, p, out):
    n, n_feat = y.shape
    for i in range(n):
        k = labels[i]
        for v in range(n_feat):
            out[k, v] += abs(y[i, v] - centroids[k, v]) ** p


def dispersions(m, s, centroids, p: float) -> Dispersions:
    """Per-cluster, per-feature p-power dispersion around ``centroids``."""
    p = check_exponent(p)
    y = m.values if hasattr(m, "values") else np.asarray(m, dtype=float)
    labels = s.labels if hasattr(s, "labels") else np.asarray(s, dtype=np.int64)
    centroids = np.ascontiguousarray(centroids, dtype=float)
    if centroids.ndim != 2 or centroids.shape[1] != y.shape[1]:
        raise ValueError("centroids must be k x V with V matching the data")
    if labels.shape[0] != y.shape[0]:
        raise ValueError("partition and data disagree on the number of entities")
    out = np.zeros(centroids.shape)
    _grouped_dispersions(np.ascontiguousarray(y, dtype=float),
                         np.ascontiguousarray(labels, dtype=np.int64), centroids, p, out)
    return Dispersions(out, p)


def update_weights(d, p: float | None = None) -> np.ndarray:
    """Feature weights inversely related to dispersion.

    ``w_kv = 1 / sum_u (D_kv / D_ku)**(1/(p-1))``. A row containing zero
    dispersions shares its weight equally among those features.
    """
    if isinstance(d, Dispersions):
        p = d.p if p is None else p
        d = d.d
    p = check_exponent(p)
    d = np.atleast_2d(np.asarray(d, dtype=float))
    if np.any(d < 0):
        raise ValueError("dispersions must be non-negative")
    w = np.empty_like(d)
    zero = d == 0
    has_zero = zero.any(axis=1)
    if has_zero.any():
        z = zero[has_zero].astype(float)
        w[has_zero] = z / z.sum(axis=1, keepdims=True)
    rest = ~has_zero
    if rest.any():
        dr = d[rest]
        # ratios against the row minimum stay in (0, 1]: no overflow
        r = (dr.min(axis=1, keepdims=True) / dr) ** (1.0 / (p - 1.0))
        w[rest] = r / r.sum(axis=1, keepdims=True)
    return w


# -- assignment ----------------------------------------------------------------

@nb.njit(cache=True)
def _dist_bounded(y, i, centroids, k, wb, p, bound, strict):
    # partial sums only grow, so stop once the bound is beaten
    acc = 0.0
    for v in range(y.shape[1]):
        if wb[k, v] > 0.0:
            acc += wb[k, v] * abs(y[i, v] - centroids[k, v]) ** p
            if acc > bound or (strict and acc == bound):
                break
    return acc


@nb.njit(cache=True)
def _assign_pb(y, centroids, wb, p, hint, labels, best):
    n = y.shape[0]
    k_count = centroids.shape[0]
    for i in range(n):
        bd = np.inf
        bk = -1
        h = hint[i]
        if 0 <= h < k_count:
            # the previous cluster gives a tight starting bound
            bd = _dist_bounded(y, i, centroids, h, wb, p, np.inf, False)
            bk = h
        for k in range(k_count):
            if k == h:
                continue
            # a lower id wins ties, so it only needs to match the bound
            strict = bk >= 0 and k > bk
            acc = _dist_bounded(y, i, centroids, k, wb, p, bd, strict)
            if acc < bd or (acc == bd and k < bk):
                bd = acc
                bk = k
        labels[i] = bk
        best[i] = bd


def assign_pb(y: np.ndarray, centroids: np.ndarray, weights: np.ndarray, p: float,
              beta: float, hint: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid under the weighted distance; ties go to the lower id.

    ``hint`` (previous labels) only speeds the search up; the result does
    not depend on it.
    """
    y = np.ascontiguousarray(y, dtype=float)
    labels = np.empty(y.shape[0], dtype=np.int64)
    best = np.empty(y.shape[0])
    if hint is None:
        hint = np.full(y.shape[0], -1, dtype=np.int64)
    wb = np.ascontiguousarray(np.asarray(weights, dtype=float) ** beta)
    _assign_pb(y, np.ascontiguousarray(centroids, dtype=float), wb, float(p),
               np.ascontiguousarray(hint, dtype=np.int64), labels, best)
    return labels, best


@nb.njit(cache=True)
def _distances_pb(y, c, wb, p, out):
    n, n_feat = y.shape
    for i in range(n):
        acc = 0.0
        for v in range(n_feat):
            if wb[v] > 0.0:
                acc += wb[v] * abs(y[i, v] - c[v]) ** p
        out[i] = acc


def distances_to_center_pb(y: np.ndarray, c: np.ndarray, w: np.ndarray, p: float,
                           beta: float) -> np.ndarray:
    """Weighted distance from every row of ``y`` to the single centre ``c``."""
    y = np.ascontiguousarray(y, dtype=float)
    out = np.empty(y.shape[0])
    wb = np.ascontiguousarray(np.asarray(w, dtype=float) ** beta)
    _distances_pb(y, np.ascontiguousarray(c, dtype=float), wb, float(p), out)
    return out
