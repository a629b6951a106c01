import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from award.core import DataMatrix, Partition
from award.datagen import (
    MixtureConfig,
    NoiseSpec,
    add_noise_features,
    blur_cluster_fragments,
    cluster_sizes,
    generate_mixture,
    make_dataset,
    named_dataset,
    paper_table1,
    parse_config_name,
    substitute_entities,
    table1_names,
)


def test_base_configuration():
    ds = generate_mixture(MixtureConfig(1000, 6, 3, seed=4))
    assert ds.matrix.values.shape == (1000, 6)
    assert ds.truth.k == 3 and ds.name == "1000x6-3"
    assert np.all(ds.truth.sizes >= 20)
    assert np.all((ds.sigma_sq >= 0.5) & (ds.sigma_sq <= 1.5))


def test_same_seed_same_bytes():
    a = make_dataset(MixtureConfig(200, 4, 3, seed=9), (NoiseSpec("noise_features", 2),))
    b = make_dataset(MixtureConfig(200, 4, 3, seed=9), (NoiseSpec("noise_features", 2),))
    assert a.matrix.values.tobytes() == b.matrix.values.tobytes()
    assert np.array_equal(a.truth.labels, b.truth.labels)
    c = make_dataset(MixtureConfig(200, 4, 3, seed=10))
    assert not np.array_equal(a.matrix.values[:, :4], c.matrix.values)


def test_noise_leaves_base_data_alone():
    clean = named_dataset("1000x12-6", 3)
    noisy = named_dataset("1000x12-6 +6NF", 3)
    assert np.array_equal(noisy.matrix.values[:, :12], clean.matrix.values)
    assert noisy.noise_feature_mask.tolist() == [False] * 12 + [True] * 6


def test_single_cluster_mean_near_centroid():
    cfg = MixtureConfig(1000, 5, 1, sigma_sq_range=(1.0, 1.0), seed=2)
    ds = generate_mixture(cfg)
    gap = np.abs(ds.matrix.values.mean(axis=0) - ds.centroids[0])
    assert np.all(gap <= 3 / np.sqrt(1000))


def test_infeasible_config():
    with pytest.raises(ValueError, match="do not fit"):
        MixtureConfig(100, 2, 6)
    with pytest.raises(ValueError):
        MixtureConfig(100, 2, 2, sigma_sq_range=(0.0, 1.0))


@given(st.integers(20, 2000), st.integers(1, 12), st.integers(0, 10_000))
@settings(max_examples=60)
def test_cluster_sizes_respect_minimum(n, k, seed):
    if k * 20 > n:
        with pytest.raises(ValueError):
            cluster_sizes(n, k, 20, seed)
        return
    sizes = cluster_sizes(n, k, 20, seed)
    assert sizes.sum() == n and sizes.size == k and sizes.min() >= 20


# -- noise ---------------------------------------------------------------------

def test_noise_features():
    ds = named_dataset("1000x6-3 +3NF", 0)
    assert ds.matrix.n_features == 9 and ds.name == "1000x6-3 +3NF"
    base = ds.matrix.values[:, :6]
    extra = ds.matrix.values[:, 6:]
    assert base.min() <= extra.min() and extra.max() <= base.max()
    m = DataMatrix(np.arange(6.0).reshape(3, 2))
    assert add_noise_features(m, 0) is m


def test_blur_fragment_count():
    ds = named_dataset("1000x12-6 50%N", 1)
    assert len(ds.blurred) == 36 and len(set(ds.blurred)) == 36
    assert ds.name == "1000x12-6 50%N"


def test_blur_only_touches_chosen_fragments():
    clean = named_dataset("1000x6-3", 5)
    out, frags = blur_cluster_fragments(clean.matrix, clean.truth, 0.5, 1, return_fragments=True)
    assert len(frags) == 9
    chosen = set(frags)
    lo, hi = clean.matrix.values.min(), clean.matrix.values.max()
    for k in range(3):
        rows = clean.truth.members(k)
        for v in range(6):
            before, after = clean.matrix.values[rows, v], out.values[rows, v]
            if (k, v) in chosen:
                assert np.all((after >= lo) & (after <= hi))
                assert not np.array_equal(before, after)
            else:
                assert np.array_equal(before, after)


def test_blur_below_one_fragment_is_identity():
    m = DataMatrix(np.random.default_rng(0).normal(size=(10, 2)))
    out = blur_cluster_fragments(m, Partition([0] * 5 + [1] * 5), 0.1, 0)
    assert np.array_equal(out.values, m.values)


def test_substitution():
    clean = named_dataset("1000x20-10", 0)
    out, mask = substitute_entities(clean.matrix, 0.2, 3)
    assert mask.sum() == 200
    assert np.array_equal(out.values[~mask], clean.matrix.values[~mask])
    assert out.values.shape == clean.matrix.values.shape
    with pytest.raises(ValueError):
        substitute_entities(clean.matrix, 1.0)


@given(st.integers(0, 1000), st.floats(0.05, 1.0))
@settings(max_examples=20)
def test_noise_keeps_shape(seed, fraction):
    ds = make_dataset(MixtureConfig(120, 3, 2, seed=seed))
    blurred = blur_cluster_fragments(ds.matrix, ds.truth, fraction, seed)
    assert blurred.values.shape == (120, 3)
    assert add_noise_features(ds.matrix, 2, seed).values.shape == (120, 5)
    if fraction < 1:
        assert substitute_entities(ds.matrix, fraction, seed)[0].values.shape == (120, 3)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("gaussian", 0.1)
    with pytest.raises(ValueError):
        NoiseSpec("noise_features", 1.5)
    with pytest.raises(ValueError):
        NoiseSpec("cluster_blur", 0.0)
    assert NoiseSpec("entity_substitution", 0.2).label == "20%S"


# -- named configurations ------------------------------------------------------

def test_parse_names():
    cfg, noise = parse_config_name("1000x12-6 +6NF", seed=7)
    assert (cfg.n_entities, cfg.n_features, cfg.n_clusters, cfg.seed) == (1000, 12, 6, 7)
    assert noise == (NoiseSpec("noise_features", 6),)
    _, noise = parse_config_name("1000x20-10 50%N")
    assert noise == (NoiseSpec("cluster_blur", 0.5),)
    with pytest.raises(ValueError, match="cannot parse"):
        parse_config_name("1000 by 6")


def test_table1_preset():
    names = table1_names()
    assert len(names) == 9
    assert names[:3] == ["1000x6-3", "1000x6-3 +3NF", "1000x6-3 50%N"]
    sets = paper_table1(seeds=range(2))
    assert len(sets) == 18
    assert {ds.name for ds in sets} == set(names)


@pytest.mark.slow
def test_table1_full_count():
    assert len(paper_table1()) == 180
