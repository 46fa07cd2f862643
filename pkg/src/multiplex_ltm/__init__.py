"""Heterogeneous multiplex linear threshold model: simulation and exact inference."""

from .analytic import FamilySpec, generate, permutation_probability, repeated_path_centrality
from .bayesnet import (
    BayesNet,
    ConditionalProbabilityTable,
    MarginalResult,
    build_bayes_net,
    build_cpt,
    exact_marginals_enumeration,
    influence_spread_bn,
)
from .errors import (
    CapacityError,
    CyclicProjectionError,
    MultiplexError,
    NetworkValidationError,
    UnsupportedProtocolError,
)
from .experiments import build_signal_network, optimal_protocol_sweep, pe_sweep, utility_Q
from .lbp import loopy_bp
from .live_edge import (
    LiveEdgeSelection,
    LiveEdgeTree,
    ReachabilityResult,
    build_live_edge_tree,
    cascade_centrality,
    enumerate_selections,
    exact_probabilities,
    exact_probabilities_batch,
    is_U_reachable_tree,
    reachable_set_fixed_point,
)
from .network import (
    LayerGraph,
    MultiplexNetwork,
    is_dag,
    is_polytree,
    load_network,
    project,
    read_network,
    serialize_network,
    write_network,
)
from .protocols import AND, OR, Protocol, Threshold
from .simulation import SpreadEstimate, estimate_spread, run_trial, simulate_thresholds

__all__ = [name for name in dir() if not name.startswith("_")]
