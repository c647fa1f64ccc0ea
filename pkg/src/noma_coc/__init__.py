"""NOMA cell-outage compensation: failed-user association, convex power
allocation, a brute-force optimal baseline, and a neural surrogate."""

from .barrier import CanonicalProblem, SolverConfig, SolveTrace, solve_barrier
from .channel import channel_gain, dbm_to_linear, generate_topology, linear_to_dbm, path_loss_db
from .domain import (
    AssociationMap,
    BaseStation,
    Cluster,
    InterferenceConfig,
    PowerSolution,
    Scenario,
    SystemParams,
    User,
    check_constraints,
    connected_se,
    failed_se,
    sort_and_cluster,
)
from .errors import (
    BudgetExceededError,
    ConfigurationError,
    ContractError,
    DegenerateClusterError,
    InfeasibleError,
    NomaCocError,
)
from .solver import (
    ClusterSpec,
    PAInstance,
    grid_oracle,
    make_instance,
    solve_compensation,
    solve_compensation_interference,
    solve_pre_outage,
)

__version__ = "0.1.0"

__all__ = [
    "AssociationMap",
    "BaseStation",
    "BudgetExceededError",
    "CanonicalProblem",
    "Cluster",
    "ClusterSpec",
    "ConfigurationError",
    "ContractError",
    "DegenerateClusterError",
    "InfeasibleError",
    "InterferenceConfig",
    "NomaCocError",
    "PAInstance",
    "PowerSolution",
    "Scenario",
    "SolveTrace",
    "SolverConfig",
    "SystemParams",
    "User",
    "channel_gain",
    "check_constraints",
    "connected_se",
    "dbm_to_linear",
    "failed_se",
    "generate_topology",
    "grid_oracle",
    "linear_to_dbm",
    "make_instance",
    "path_loss_db",
    "solve_barrier",
    "solve_compensation",
    "solve_compensation_interference",
    "solve_pre_outage",
    "sort_and_cluster",
    "__version__",
]
