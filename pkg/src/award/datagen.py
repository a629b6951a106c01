"""Seeded synthetic benchmarks: spherical Gaussian mixtures and the three
noise mechanisms (uniform noise features, blurred cluster fragments and
substituted entities).

Every random draw comes from a generator derived from ``(seed, stream)`` so
adding noise never perturbs the base data of the same seed.
"""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import DataMatrix, Partition, as_matrix

STREAM_MIXTURE = 0
STREAM_NOISE_FEATURES = 1
STREAM_BLUR = 2
STREAM_SUBSTITUTE = 3


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class MixtureConfig:
    n_entities: int
    n_features: int
    n_clusters: int
    sigma_sq_range: tuple[float, float] = (0.5, 1.5)
    min_cluster_size: int = 20
    seed: int = 0

    def __post_init__(self):
        if min(self.n_entities, self.n_features, self.n_clusters) < 1:
            raise ValueError("entities, features and clusters must be positive")
        if self.n_clusters * self.min_cluster_size > self.n_entities:
            raise ValueError(
                f"{self.n_clusters} clusters of at least {self.min_cluster_size} entities "
                f"do not fit in {self.n_entities} entities")
        lo, hi = self.sigma_sq_range
        if not 0 < lo <= hi:
            raise ValueError("sigma_sq_range must be positive and ordered")

    @property
    def name(self) -> str:
        return f"{self.n_entities}x{self.n_features}-{self.n_clusters}"


@dataclass(frozen=True)
class NoiseSpec:
    """``kind`` is ``noise_features`` (amount = count), ``cluster_blur``
    (fraction of cluster/feature fragments) or ``entity_substitution``
    (fraction of entities)."""

    kind: str
    amount: float

    KINDS = ("noise_features", "cluster_blur", "entity_substitution")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "noise_features":
            if self.amount < 0 or int(self.amount) != self.amount:
                raise ValueError("noise feature count must be a non-negative integer")
        elif not 0 < self.amount <= 1:
            raise ValueError("noise fraction must lie in (0, 1]")

    @property
    def label(self) -> str:
        if self.kind == "noise_features":
            return f"+{int(self.amount)}NF"
        if self.kind == "cluster_blur":
            return f"{round(100 * self.amount):d}%N"
        return f"{round(100 * self.amount):d}%S"


@dataclass
class Dataset:
    """A generated matrix with its ground truth and provenance."""

    matrix: DataMatrix
    truth: Partition
    config: MixtureConfig
    noise: tuple[NoiseSpec, ...] = ()
    centroids: np.ndarray | None = None
    sigma_sq: np.ndarray | None = None
    noise_feature_mask: np.ndarray | None = None
    substituted: np.ndarray | None = None
    blurred: list = field(default_factory=list)

    @property
    def name(self) -> str:
        return " ".join([self.config.name] + [n.label for n in self.noise])

    def metadata(self) -> dict:
        return {
            "name": self.name,
            "config": asdict(self.config),
            "seed": self.config.seed,
            "noise": [{"kind": n.kind, "amount": n.amount} for n in self.noise],
            "truth": self.truth.labels.tolist(),
            "noise_features": [] if self.noise_feature_mask is None
            else np.flatnonzero(self.noise_feature_mask).tolist(),
            "blurred_fragments": [list(map(int, f)) for f in self.blurred],
            "substituted": [] if self.substituted is None
            else np.flatnonzero(self.substituted).tolist(),
        }


def cluster_sizes(n: int, k: int, minimum: int, rng) -> np.ndarray:
    """Uniform cut points over the slack ``n - k*minimum``, plus the minimum."""
    rng = _rng(rng)
    slack = n - k * minimum
    if slack < 0:
        raise ValueError(f"cannot place {k} clusters of {minimum} in {n} entities")
    cuts = np.sort(rng.integers(0, slack + 1, size=k - 1))
    return np.diff(np.concatenate(([0], cuts, [slack]))) + minimum


def generate_mixture(cfg: MixtureConfig) -> Dataset:
    """Spherical Gaussian clusters with N(0,1) centroid components and a
    per-cluster variance drawn uniformly from ``sigma_sq_range``."""
    rng = stream_rng(cfg.seed, STREAM_MIXTURE)
    k, v = cfg.n_clusters, cfg.n_features
    sizes = cluster_sizes(cfg.n_entities, k, cfg.min_cluster_size, rng)
    centroids = rng.standard_normal((k, v))
    sigma_sq = rng.uniform(*cfg.sigma_sq_range, size=k)
    labels = np.repeat(np.arange(k), sizes)
    values = centroids[labels] + rng.standard_normal((cfg.n_entities, v)) * np.sqrt(sigma_sq)[labels, None]
    return Dataset(DataMatrix(values), Partition(labels), cfg, centroids=centroids,
                   sigma_sq=sigma_sq, noise_feature_mask=np.zeros(v, dtype=bool))


def add_noise_features(m, count: int, rng=None) -> DataMatrix:
    """Append ``count`` columns of Uniform[min, max] over all data values."""
    m = as_matrix(m)
    count = int(count)
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return m
    rng = _rng(rng)
    lo, hi = m.values.min(), m.values.max()
    extra = rng.uniform(lo, hi, size=(m.n_entities, count))
    names = None
    if m.feature_names is not None:
        names = m.feature_names + tuple(f"noise{j}" for j in range(count))
    return DataMatrix(np.hstack([m.values, extra]), names)


def blur_cluster_fragments(m, truth: Partition, fraction: float, rng=None,
                           return_fragments: bool = False):
    """Replace ``floor(fraction*K*V)`` randomly chosen (cluster, feature)
    fragments by Uniform[min, max] noise over all data values."""
    m = as_matrix(m)
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    if truth.n != m.n_entities:
        raise ValueError("truth does not cover the matrix")
    rng = _rng(rng)
    k, v = truth.k, m.n_features
    n_frag = int(np.floor(fraction * k * v + 1e-9))
    values = m.values.copy()
    lo, hi = values.min(), values.max()
    chosen = np.sort(rng.choice(k * v, size=n_frag, replace=False))
    fragments = [(int(c // v), int(c % v)) for c in chosen]
    for cluster, feature in fragments:
        rows = truth.members(cluster)
        values[rows, feature] = rng.uniform(lo, hi, size=rows.size)
    out = DataMatrix(values, m.feature_names)
    return (out, fragments) if return_fragments else out


def substitute_entities(m, fraction: float, rng=None) -> tuple[DataMatrix, np.ndarray]:
    """Replace ``floor(fraction*N)`` random rows by Uniform[min, max] draws.

    Returns the new matrix and a boolean mask of substituted rows.
    """
    m = as_matrix(m)
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    rng = _rng(rng)
    n = m.n_entities
    count = int(np.floor(fraction * n + 1e-9))
    values = m.values.copy()
    lo, hi = values.min(), values.max()
    rows = rng.choice(n, size=count, replace=False)
    values[rows] = rng.uniform(lo, hi, size=(count, m.n_features))
    mask = np.zeros(n, dtype=bool)
    mask[rows] = True
    return DataMatrix(values, m.feature_names), mask


def apply_noise(ds: Dataset, spec: NoiseSpec) -> Dataset:
    seed = ds.config.seed
    if spec.kind == "noise_features":
        count = int(spec.amount)
        m = add_noise_features(ds.matrix, count, stream_rng(seed, STREAM_NOISE_FEATURES))
        mask = np.concatenate([ds.noise_feature_mask, np.ones(count, dtype=bool)])
        return Dataset(m, ds.truth, ds.config, ds.noise + (spec,), ds.centroids, ds.sigma_sq,
                       mask, ds.substituted, ds.blurred)
    if spec.kind == "cluster_blur":
        m, frags = blur_cluster_fragments(ds.matrix, ds.truth, spec.amount,
                                          stream_rng(seed, STREAM_BLUR), return_fragments=True)
        return Dataset(m, ds.truth, ds.config, ds.noise + (spec,), ds.centroids, ds.sigma_sq,
                       ds.noise_feature_mask, ds.substituted, ds.blurred + frags)
    m, mask = substitute_entities(ds.matrix, spec.amount, stream_rng(seed, STREAM_SUBSTITUTE))
    return Dataset(m, ds.truth, ds.config, ds.noise + (spec,), ds.centroids, ds.sigma_sq,
                   ds.noise_feature_mask, mask, ds.blurred)


def make_dataset(cfg: MixtureConfig, noise=()) -> Dataset:
    ds = generate_mixture(cfg)
    for spec in noise:
        ds = apply_noise(ds, spec)
    return ds


# -- the nine benchmark configurations -----------------------------------------

BASE_CONFIGS = ((1000, 6, 3), (1000, 12, 6), (1000, 20, 10))

_NAME = re.compile(r"^\s*(\d+)x(\d+)-(\d+)\s*(?:(\+\d+NF)|(\d+)\\?%N)?\s*$")


def parse_config_name(name: str, seed: int = 0) -> tuple[MixtureConfig, tuple[NoiseSpec, ...]]:
    """Parse names such as ``1000x6-3``, ``1000x6-3 +3NF`` or ``1000x12-6 50%N``."""
    match = _NAME.match(name)
    if not match:
        raise ValueError(f"cannot parse configuration name {name!r}")
    n, v, k, nf, blur = match.groups()
    cfg = MixtureConfig(int(n), int(v), int(k), seed=seed)
    noise: tuple[NoiseSpec, ...] = ()
    if nf:
        noise = (NoiseSpec("noise_features", int(nf[1:-2])),)
    elif blur:
        noise = (NoiseSpec("cluster_blur", int(blur) / 100),)
    return cfg, noise


def table1_names() -> list[str]:
    names = []
    for n, v, k in BASE_CONFIGS:
        base = f"{n}x{v}-{k}"
        names += [base, f"{base} +{v // 2}NF", f"{base} 50%N"]
    return names


def paper_table1(seeds=range(20)) -> list[Dataset]:
    """All nine configurations for every seed (9 x 20 = 180 by default)."""
    out = []
    for name in table1_names():
        for seed in seeds:
            cfg, noise = parse_config_name(name, seed)
            out.append(make_dataset(cfg, noise))
    return out


def named_dataset(name: str, seed: int) -> Dataset:
    cfg, noise = parse_config_name(name, seed)
    return make_dataset(cfg, noise)
