"""Deterministic simulator for preference-heterogeneous federated learning.

Clients optimise the same multi-objective problem under personal preference
weights. The personalised server mixes models with similarity-derived
weights and recursively bipartitions stalled clusters; classic baselines
(FedAvg, FedProx, clustered federation, no communication) and a
multi-objective solution-set metric suite round out the toolkit.
"""

from .aggregation import plain_mean, weighted_aggregate
from .clustering import (
    Bipartition,
    brute_force_min_cut,
    eigen_smallest_two,
    jacobi_eigh,
    spectral_bipartition,
)
from .config import RunConfig, config_hash, load_config, parse_config, problem_hash
from .errors import ConfigError, NumericError, ShapeError
from .federation import (
    ALGORITHMS,
    ClientBank,
    ClusterState,
    FederationOutcome,
    RoundReport,
    build_client_bank,
    cluster_purity,
    run_algorithm,
    run_cfl,
    run_fedavg,
    run_fedpref,
    run_fedprox,
    run_local_only,
)
from .metrics import (
    SolutionSet,
    cardinality,
    hypervolume,
    hypervolume_mc,
    igd,
    pareto_front,
    sparsity,
)
from .params import LayeredParams, ParamDelta, add, flat_norm, scale, sub
from .preferences import PrefDistribution, PreferenceVector, generate_preferences
from .problems import (
    ConflictingGroupsScenario,
    QuadraticMOProblem,
    conflicting_groups,
    local_train,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "Bipartition",
    "ClientBank",
    "ClusterState",
    "ConfigError",
    "ConflictingGroupsScenario",
    "FederationOutcome",
    "LayeredParams",
    "NumericError",
    "ParamDelta",
    "PrefDistribution",
    "PreferenceVector",
    "QuadraticMOProblem",
    "RoundReport",
    "RunConfig",
    "ShapeError",
    "SolutionSet",
    "add",
    "brute_force_min_cut",
    "build_client_bank",
    "cardinality",
    "cluster_purity",
    "config_hash",
    "conflicting_groups",
    "eigen_smallest_two",
    "flat_norm",
    "generate_preferences",
    "hypervolume",
    "hypervolume_mc",
    "igd",
    "jacobi_eigh",
    "load_config",
    "local_train",
    "pareto_front",
    "parse_config",
    "plain_mean",
    "problem_hash",
    "run_algorithm",
    "run_cfl",
    "run_fedavg",
    "run_fedpref",
    "run_fedprox",
    "run_local_only",
    "scale",
    "spectral_bipartition",
    "sub",
    "sparsity",
    "weighted_aggregate",
]
