"""Deterministic cluster simulator: state, driver, emulated surfaces, scenarios."""

from .cluster import Cluster, derive_health
from .scenario import Scenario, list_builtin, load_scenario
from .state import ClusterSpec, ClusterState, FaultKind, FaultSpec, Health, HostSpec

__all__ = [
    "Cluster",
    "ClusterSpec",
    "ClusterState",
    "FaultKind",
    "FaultSpec",
    "Health",
    "HostSpec",
    "Scenario",
    "derive_health",
    "list_builtin",
    "load_scenario",
]
