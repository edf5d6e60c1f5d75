"""Graph Echo State Networks for semi-supervised node classification."""

from .datasets import SbmSpec, generate_sbm, load_dataset, sbm_splits, write_dataset
from .graph import (
    Graph,
    NodeData,
    PathDistribution,
    Split,
    edge_homophily,
    node_homophily,
    shortest_path_distribution,
    spectral_radius,
)
from .readout import RidgeReadout, accuracy, fit_ridge, predict
from .reservoir import (
    Embeddings,
    Reservoir,
    ReservoirConfig,
    compute_embeddings,
    init_reservoir,
    iterate_states,
    sensitivity_bound,
    separability_statistic,
    stability_regime,
)
from .selection import GridSpec, grid_search, replace_features_constant

__version__ = "0.1.0"
