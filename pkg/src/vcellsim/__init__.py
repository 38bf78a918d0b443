"""Uplink network simulator with virtual cells.

BS groups ("virtual cells") jointly decode their users; powers are
allocated by cyclic water-filling, clusterings come from minimax-linkage
agglomeration, k-means, or exhaustive search, and networks are scored by
achieved sum rate under residual inter-cell interference.
"""

from .allocator import (CellProblem, PowerAllocation, effective_gain,
                        kkt_residuals, logdet_objective, solve_cell,
                        waterfill_user)
from .channel import (ChannelTensor, ConfigError, SimulationConfig, Topology,
                      dbm_to_mw, generate_channels, generate_topology,
                      mw_to_dbm, pathloss_db)
from .clustering import (CapacityError, Dendrogram, VirtualCell,
                         VirtualCellPartition, affiliate_users,
                         canonical_partition, enumerate_partitions,
                         hierarchical_cluster, kmeans_cluster,
                         minimax_linkage, minimax_radius)
from .evaluation import (AggregateRow, NetworkResult, achieved_sum_rate,
                         aggregate_results, build_cell_problem,
                         exhaustive_best_clustering, run_sweep,
                         score_partition, solve_partition)

__version__ = "0.1.0"

__all__ = [
    "AggregateRow", "CapacityError", "CellProblem", "ChannelTensor",
    "ConfigError", "Dendrogram", "NetworkResult", "PowerAllocation",
    "SimulationConfig", "Topology", "VirtualCell", "VirtualCellPartition",
    "achieved_sum_rate", "affiliate_users", "aggregate_results",
    "build_cell_problem", "canonical_partition", "dbm_to_mw",
    "effective_gain", "enumerate_partitions", "exhaustive_best_clustering",
    "generate_channels", "generate_topology", "hierarchical_cluster",
    "kkt_residuals", "kmeans_cluster", "logdet_objective", "minimax_linkage",
    "minimax_radius", "mw_to_dbm", "pathloss_db", "run_sweep",
    "score_partition", "solve_cell", "solve_partition", "waterfill_user",
]
