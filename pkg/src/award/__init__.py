"""Ward-family agglomerative clustering with anomalous-pattern initialisation
and Minkowski feature weighting."""
from .agglomerative import (
    ALGORITHMS,
    AgglomerationResult,
    a_ward,
    a_ward_pb,
    run_algorithm,
    ward,
    ward_cost,
    ward_p,
    ward_p_cost,
    ward_pb_cost,
)
from .core import (
    ClusterState,
    ConvergenceError,
    DataMatrix,
    Dendrogram,
    Merge,
    Partition,
    cut_dendrogram,
    partition_from_labels,
    standardize_range,
)
from .datagen import MixtureConfig, NoiseSpec, generate_mixture, make_dataset, named_dataset
from .evaluation import adjusted_rand, best_ari_over_grid, grid_search, run_grid, silhouette
from .minkowski import (
    dispersions,
    minkowski_center,
    minkowski_power_distance,
    update_weights,
    weighted_distance_pb,
)
from .partitional import anomalous_init_pb, ik_means, imwk_means_pb, kmeans

__version__ = "0.1.0"
