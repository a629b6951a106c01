import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from award.core import Partition
from award.minkowski import (
    Dispersions,
    assign_pb,
    dispersions,
    grouped_minkowski_centers,
    minkowski_center,
    minkowski_power_distance,
    update_weights,
    weighted_distance_pb,
)

from oracles import grid_center_1d, weights_by_definition

vectors = arrays(np.float64, st.integers(1, 6), elements=st.floats(-100, 100))
exponents = st.floats(1.05, 5.0)


# -- distances -----------------------------------------------------------------

@pytest.mark.parametrize("x, y, p, expected", [
    ((0, 0), (3, 4), 2, 25.0),
    ((1, 1), (2, 3), 3, 9.0),
    ((2, 5), (2, 5), 1.7, 0.0),
])
def test_power_distance_examples(x, y, p, expected):
    assert minkowski_power_distance(x, y, p) == pytest.approx(expected)


def test_power_distance_errors():
    with pytest.raises(ValueError, match="length"):
        minkowski_power_distance((1, 2), (1,), 2)
    with pytest.raises(ValueError, match="greater than 1"):
        minkowski_power_distance((1,), (2,), 1.0)


# coordinates on a 1e-6 grid, so a nonzero difference cannot underflow when raised to p
grid_floats = st.floats(-100, 100).map(lambda v: round(v, 6))


@given(arrays(np.float64, st.integers(1, 6), elements=grid_floats), exponents, st.data())
def test_power_distance_symmetric_and_zero_iff_equal(x, p, data):
    y = data.draw(arrays(np.float64, x.shape, elements=grid_floats))
    d = minkowski_power_distance(x, y, p)
    assert d == minkowski_power_distance(y, x, p)
    assert minkowski_power_distance(x, x, p) == 0
    if not np.array_equal(x, y):
        assert d > 0


def test_weighted_distance_examples():
    assert weighted_distance_pb((0, 0), (2, 2), (0.5, 0.5), 2, 2) == pytest.approx(2.0)
    assert weighted_distance_pb((0, 0), (1, 1), (0.8, 0.2), 2, 2) == pytest.approx(0.68)
    # a zero weight removes its feature entirely
    a = weighted_distance_pb((0, 0), (1, 50), (1, 0), 3, 1.5)
    b = weighted_distance_pb((0, 0), (1, -7), (1, 0), 3, 1.5)
    assert a == b == pytest.approx(1.0)


def test_weighted_distance_matches_unweighted_form_at_beta_equal_p():
    x, c, w, p = np.array([0.3, -1.0, 2.0]), np.array([1.0, 1.0, 0.0]), np.array([0.2, 0.5, 0.3]), 2.6
    direct = sum(w[v] ** p * abs(x[v] - c[v]) ** p for v in range(3))
    assert weighted_distance_pb(x, c, w, p, p) == pytest.approx(direct, rel=1e-14)
    # rescaling the features by the weights gives the same number
    assert minkowski_power_distance(w * x, w * c, p) == pytest.approx(direct, rel=1e-12)


def test_weighted_distance_rejects_bad_weights():
    with pytest.raises(ValueError, match="non-negative"):
        weighted_distance_pb((0, 0), (1, 1), (1.5, -0.5), 2, 2)
    with pytest.raises(ValueError, match="sum to 1"):
        weighted_distance_pb((0, 0), (1, 1), (0.5, 0.6), 2, 2)


def test_assign_pb_ties_go_to_lower_index():
    y = np.array([[0.0], [1.0]])
    labels, _ = assign_pb(y, np.array([[0.5], [0.5]]), np.ones((2, 1)), 2.0, 2.0)
    assert labels.tolist() == [0, 0]
    labels, _ = assign_pb(y, np.array([[0.5], [0.5]]), np.ones((2, 1)), 2.0, 2.0,
                          hint=np.array([1, 1]))
    assert labels.tolist() == [0, 0]


@given(st.integers(0, 10_000), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
@settings(max_examples=60)
def test_assign_pb_hint_never_changes_the_answer(seed, p):
    # small integers so that exact ties between centroids are common
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 4, size=(30, 3)).astype(float)
    c = rng.integers(0, 4, size=(4, 3)).astype(float)
    w = rng.dirichlet(np.ones(3), 4)
    w[rng.random(w.shape) < 0.2] = 0.0
    brute = np.array([[np.sum(w[k] ** 1.5 * np.abs(row - c[k]) ** p) for k in range(4)]
                      for row in y])
    want = brute.argmin(axis=1)
    plain, _ = assign_pb(y, c, w, p, 1.5)
    hinted, best = assign_pb(y, c, w, p, 1.5, hint=rng.integers(0, 4, 30))
    assert plain.tolist() == want.tolist() == hinted.tolist()
    assert np.allclose(best, brute.min(axis=1))


# -- Minkowski centre ----------------------------------------------------------

def test_center_examples():
    pts = np.array([[0.0, 1.0], [2.0, 5.0], [4.0, 0.0]])
    assert np.allclose(minkowski_center(pts, 2), pts.mean(axis=0))
    assert np.array_equal(minkowski_center(pts[:1], 3.3), pts[0])
    c = minkowski_center([0.0, 0.0, 1.0], 3)
    assert c[0] == pytest.approx(np.sqrt(2) - 1, abs=1e-9)
    assert c[0] == pytest.approx(0.41421, abs=1e-4)


def test_center_of_empty_set():
    with pytest.raises(ValueError, match="empty"):
        minkowski_center(np.empty((0, 2)), 2)


@given(arrays(np.float64, st.tuples(st.integers(1, 25), st.integers(1, 3)),
              elements=st.floats(-50, 50)))
def test_center_at_two_is_mean(pts):
    assert np.allclose(minkowski_center(pts, 2), pts.mean(axis=0), rtol=0, atol=1e-10)


@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-10, 10)),
       st.sampled_from([1.5, 2.0, 2.5, 3.0, 4.2]))
@settings(max_examples=40, deadline=None)
def test_center_beats_grid_oracle(x, p):
    c = minkowski_center(x, p)[0]
    assert x.min() <= c <= x.max()
    _, best = grid_center_1d(x, p)
    assert np.sum(np.abs(x - c) ** p) <= best + 1e-8


def test_center_handles_repeated_values_below_two():
    # p < 2 puts infinite curvature on data points; the bracket must cope
    x = np.array([0.0, 0.0, 0.0, 1.0, 5.0])
    c = minkowski_center(x, 1.1)[0]
    _, best = grid_center_1d(x, 1.1)
    assert np.sum(np.abs(x - c) ** 1.1) <= best + 1e-8


def test_grouped_centers_match_single():
    rng = np.random.default_rng(3)
    y = rng.normal(size=(40, 3))
    labels = rng.integers(0, 4, 40)
    got = grouped_minkowski_centers(y, labels, 4, 3.1)
    for k in range(4):
        assert np.allclose(got[k], minkowski_center(y[labels == k], 3.1), atol=1e-9)


# -- dispersions and weights ---------------------------------------------------

def test_dispersion_examples():
    d = dispersions(np.array([[0.0], [2.0]]), Partition([0, 0]), np.array([[1.0]]), 2)
    assert d.d.tolist() == [[2.0]]
    d = dispersions(np.array([[0.0], [1.0], [2.0]]), Partition([0, 0, 0]), np.array([[1.0]]), 3)
    assert d.d.tolist() == [[2.0]]
    d = dispersions(np.array([[4.0, 1.0]]), Partition([0]), np.array([[4.0, 1.0]]), 1.5)
    assert d.d.tolist() == [[0.0, 0.0]]


def test_dispersion_shape_errors():
    with pytest.raises(ValueError):
        dispersions(np.zeros((3, 2)), Partition([0, 0, 0]), np.zeros((1, 3)), 2)
    with pytest.raises(ValueError):
        dispersions(np.zeros((3, 2)), Partition([0, 0]), np.zeros((1, 2)), 2)


@pytest.mark.parametrize("d, p, expected", [
    ((1, 1), 3.0, (0.5, 0.5)),
    ((1, 4), 2.0, (0.8, 0.2)),
    ((0, 5, 7), 2.5, (1.0, 0.0, 0.0)),
    ((0, 5, 0), 2.5, (0.5, 0.0, 0.5)),
])
def test_weight_examples(d, p, expected):
    assert np.allclose(update_weights(Dispersions(np.array([d], float), p)), [expected])


def test_weights_match_formula():
    d = np.array([0.3, 1.7, 4.0, 0.9])
    for p in (1.2, 2.0, 3.7):
        assert np.allclose(update_weights(d[None, :], p)[0], weights_by_definition(d, p),
                           rtol=1e-12)


def test_weights_survive_extreme_ratios():
    w = update_weights(np.array([[1e-300, 1.0, 1e300]]), 1.1)
    assert np.all(np.isfinite(w)) and abs(w.sum() - 1) < 1e-12


def test_negative_dispersion_rejected():
    with pytest.raises(ValueError):
        update_weights(np.array([[1.0, -1.0]]), 2.0)


# zero or normal-range values: scaling a subnormal would change the input itself
positive_rows = arrays(np.float64, st.integers(1, 8),
                       elements=st.one_of(st.just(0.0), st.floats(1e-100, 1e6)))


@given(positive_rows, exponents, st.floats(1e-3, 1e3))
def test_weights_sum_to_one_and_scale_invariant(d, p, lam):
    w = update_weights(d[None, :], p)[0]
    assert abs(w.sum() - 1) < 1e-9
    assert np.all(w >= 0)
    assert np.allclose(update_weights((d * lam)[None, :], p)[0], w, rtol=0, atol=1e-9)


@given(positive_rows, exponents)
def test_weights_inverse_to_dispersion(d, p):
    w = update_weights(d[None, :], p)[0]
    order = np.argsort(d, kind="stable")
    for a, b in zip(order, order[1:]):
        if d[a] < d[b]:
            assert w[a] >= w[b]
