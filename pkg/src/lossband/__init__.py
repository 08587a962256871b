"""Minimum-energy paths, elastic-band relaxation and saddle-point atlases for
differentiable loss landscapes."""

from .autoneb import (
    AutoNebResult,
    AutoNebSchedule,
    DenseProfile,
    SaddleRecord,
    auto_neb,
    evaluate_dense,
    insert_pivots,
    insertion_candidates,
)
from .chain import Chain, arc_lengths, redistribute, tangent, total_length
from .errors import (
    ChainError,
    ConfigError,
    DimensionMismatch,
    DisconnectedGraph,
    GraphError,
    GridDomainError,
    InsertionError,
    LossbandError,
    NonFiniteValue,
    PermutationError,
    RelaxationFailed,
    TrainingDiverged,
)
from .explorer import GraphEdge, GraphNode, LandscapeGraph, explore, kruskal_mst, ultrametric_bound
from .landscape import (
    AnalyticSurface,
    Dataset,
    Evaluation,
    Landscape,
    MlpLandscape,
    MlpSpec,
    TrainConfig,
    analytic_surface,
    make_double_well,
    make_gaussian_wells,
    make_mlp,
    make_triple_well,
    pack_params,
    permute_hidden_units,
    train_minimum,
    two_cluster_dataset,
    unpack_params,
    xor_dataset,
)
from .neb import (
    NebConfig,
    RelaxResult,
    elastic_band_energy,
    loss_force_perp,
    neb_relax,
    spring_force_parallel,
)
from .oracle import GridSpec, grid_losses, grid_mep
from .params import as_params, params_from_hex, params_to_hex

__version__ = "0.1.0"
