import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from award.core import (
    ClusterState,
    DataMatrix,
    Dendrogram,
    Merge,
    Partition,
    compact_labels,
    cut_dendrogram,
    partition_from_labels,
    standardize_range,
)
from award.evaluation import adjusted_rand


# -- DataMatrix / Partition ----------------------------------------------------

def test_matrix_rejects_non_finite():
    with pytest.raises(ValueError, match="NaN"):
        DataMatrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        DataMatrix(np.empty((0, 3)))


def test_matrix_is_read_only_copy():
    raw = np.zeros((2, 2))
    m = DataMatrix(raw)
    raw[0, 0] = 5
    assert m.values[0, 0] == 0
    with pytest.raises(ValueError):
        m.values[0, 0] = 1


def test_feature_name_count_checked():
    with pytest.raises(ValueError, match="feature names"):
        DataMatrix(np.zeros((2, 2)), ("a",))


def test_partition_needs_dense_ids():
    with pytest.raises(ValueError):
        Partition([0, 2])
    assert Partition([1, 0, 1]).k == 2


def test_compact_labels():
    labels, used = compact_labels(np.array([0, 2, 2, 4]), 5)
    assert labels.tolist() == [0, 1, 1, 2]
    assert used.tolist() == [0, 2, 4]


def test_cluster_state_weight_rows():
    part = Partition([0, 1])
    c = np.zeros((2, 2))
    ok = np.full((2, 2), 0.5)
    ClusterState(part, c, ok, 2.0, 2.0)
    with pytest.raises(ValueError, match="sum to 1"):
        ClusterState(part, c, np.full((2, 2), 0.4), 2.0, 2.0)
    with pytest.raises(ValueError, match="non-negative"):
        ClusterState(part, c, np.array([[1.5, -0.5], [0.5, 0.5]]), 2.0, 2.0)
    with pytest.raises(ValueError):
        ClusterState(part, c, ok, 1.0, 2.0)


# -- partition_from_labels -----------------------------------------------------

@pytest.mark.parametrize("raw, labels, k", [
    (["a", "b", "a"], [0, 1, 0], 2),
    ([5, 5, 5], [0, 0, 0], 1),
    ([2, 0, 1], [0, 1, 2], 3),
])
def test_partition_from_labels_examples(raw, labels, k):
    s = partition_from_labels(raw)
    assert s.labels.tolist() == labels
    assert s.k == k


def test_partition_from_labels_empty():
    with pytest.raises(ValueError):
        partition_from_labels([])


@given(st.lists(st.integers(0, 6), min_size=1, max_size=40), st.permutations(range(7)))
def test_partition_from_labels_bijection_invariant(raw, perm):
    a = partition_from_labels(raw)
    b = partition_from_labels([perm[r] for r in raw])
    assert np.array_equal(a.labels, b.labels)
    assert adjusted_rand(a, b) == 1.0


# -- standardize_range ---------------------------------------------------------

def test_standardize_examples():
    m, dropped = standardize_range(DataMatrix(np.array([[0.0, 0], [1, 0], [2, 1], [1, 1]])))
    assert dropped == []
    assert np.allclose(m.values[:, 0], [-0.5, 0, 0.5, 0])
    assert np.allclose(m.values[:, 1], [-0.5, -0.5, 0.5, 0.5])


def test_standardize_drops_constant(caplog):
    m = DataMatrix(np.array([[7.0, 0], [7, 1], [7, 2]]), ("c", "x"))
    out, dropped = standardize_range(m)
    assert dropped == ["c"]
    assert out.feature_names == ("x",)
    assert np.allclose(out.values[:, 0], [-0.5, 0, 0.5])
    assert "dropping constant" in caplog.text


def test_standardize_all_constant():
    with pytest.raises(ValueError, match="no informative features"):
        standardize_range(DataMatrix(np.ones((3, 2))))


@given(arrays(np.float64, st.tuples(st.integers(2, 20), st.integers(1, 5)),
              elements=st.floats(-1e3, 1e3, allow_subnormal=False)))
def test_standardize_zero_mean(values):
    m = DataMatrix(values)
    if np.all(np.ptp(values, axis=0) == 0):
        return
    out, _ = standardize_range(m)
    assert np.all(np.abs(out.values.mean(axis=0)) < 1e-9)
    assert np.all(np.ptp(out.values, axis=0) <= 1 + 1e-12)


# -- dendrograms ---------------------------------------------------------------

def test_dendrogram_invariants_checked():
    with pytest.raises(ValueError, match="live"):
        Dendrogram((Merge(0, 1, 1.0, 2), Merge(0, 2, 1.0, 3)), 3)
    with pytest.raises(ValueError, match="size"):
        Dendrogram((Merge(0, 1, 1.0, 3),), 3)


def test_cut_examples():
    d = Dendrogram((Merge(0, 1, 1.0, 2), Merge(2, 3, 2.0, 2), Merge(4, 5, 9.0, 4)), 4)
    assert cut_dendrogram(d, 4).labels.tolist() == [0, 1, 2, 3]
    assert cut_dendrogram(d, 2).labels.tolist() == [0, 0, 1, 1]
    assert cut_dendrogram(d, 1).labels.tolist() == [0, 0, 0, 0]
    with pytest.raises(ValueError):
        cut_dendrogram(d, 0)
    with pytest.raises(ValueError):
        cut_dendrogram(d, 5)


def test_partial_dendrogram_cut_range():
    d = Dendrogram((Merge(0, 1, 1.0, 2),), 3)
    assert d.n_clusters == 2
    with pytest.raises(ValueError):
        d.cut(1)


def test_inversions_and_linkage():
    d = Dendrogram((Merge(0, 1, 5.0, 2), Merge(2, 3, 1.0, 3)), 3)
    assert d.inversions() == [1]
    assert d.linkage_matrix().tolist() == [[0, 1, 5.0, 2], [2, 3, 1.0, 3]]


@st.composite
def random_dendrograms(draw):
    n = draw(st.integers(2, 12))
    live = list(range(n))
    sizes = [1] * n
    merges = []
    for i in range(n - 1):
        a, b = sorted(draw(st.permutations(live))[:2])
        live.remove(a)
        live.remove(b)
        live.append(n + i)
        sizes.append(sizes[a] + sizes[b])
        merges.append(Merge(a, b, float(i), sizes[-1]))
    return Dendrogram(tuple(merges), n)


@given(random_dendrograms())
@settings(max_examples=60)
def test_cut_refines(d):
    for k in range(2, d.n_leaves + 1):
        fine, coarse = cut_dendrogram(d, k).labels, cut_dendrogram(d, k - 1).labels
        assert fine.max() + 1 == k
        for c in range(k):
            assert np.unique(coarse[fine == c]).size == 1
