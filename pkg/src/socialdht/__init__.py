"""Socially-aware placement of users on a Symphony DHT ring.

The package embeds an undirected social graph onto a fixed Symphony
overlay by letting users swap ring identifiers through a gossip loop,
so that greedy lookups between friends cross fewer relay nodes.
"""

from socialdht.graph import (
    SocialGraph,
    StrengthProvider,
    load_edge_list,
    strength,
    top_k_strongest,
    write_edge_list,
)
from socialdht.overlay import (
    Placement,
    Ring,
    RoutePath,
    build_ring,
    circular_distance,
    default_k,
    greedy_route,
    load_checkpoint,
    manager_of,
    rewire_fingers_to_friends,
    save_checkpoint,
    swap_users,
)
from socialdht.engine import EngineState, GossipConfig, SwapDecision, initialize, run
from socialdht.metrics import (
    IterationReport,
    MetricsOptions,
    avg_friend_latency,
    measure_snapshot,
    migration_cost,
    read_csv,
    reliability_finger,
    reliability_ihop,
    write_csv,
)
from socialdht.datasets import DatasetUnavailable, fetch, resolve_dataset
from socialdht.experiments import ExperimentSpec, run_experiment, run_q4_relabel

__version__ = "0.1.0"

__all__ = [
    "SocialGraph",
    "StrengthProvider",
    "load_edge_list",
    "write_edge_list",
    "strength",
    "top_k_strongest",
    "Ring",
    "Placement",
    "RoutePath",
    "build_ring",
    "default_k",
    "manager_of",
    "circular_distance",
    "greedy_route",
    "swap_users",
    "rewire_fingers_to_friends",
    "save_checkpoint",
    "load_checkpoint",
    "GossipConfig",
    "EngineState",
    "SwapDecision",
    "initialize",
    "run",
    "IterationReport",
    "MetricsOptions",
    "measure_snapshot",
    "avg_friend_latency",
    "migration_cost",
    "reliability_finger",
    "reliability_ihop",
    "write_csv",
    "read_csv",
    "DatasetUnavailable",
    "fetch",
    "resolve_dataset",
    "ExperimentSpec",
    "run_experiment",
    "run_q4_relabel",
    "__version__",
]
