"""Precomputed remediation plans staged from forecasts or cluster state.

A plan is a trigger description plus an ordered list of tagged tool calls.
Plans are *staged*, not executed: the orchestrator re-validates every call
against the safety guard at execution time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PLAN_SCENARIOS = (
    "disk_pressure",
    "heap_exhaustion",
    "node_loss",
    "shard_imbalance",
    "nic_degradation",
)

DISK_FILL_PLAN_HORIZON_H = 24.0
NIC_RISK_PLAN_THRESHOLD = 0.5
NODE_LOSS_GRACE_S = 300
SHARD_IMBALANCE_CV = 0.30

# Throttle segment merging so replication of merged segments stops saturating
# an already-degraded link.
MERGE_TRAFFIC_SETTINGS = {
    "index.merge.scheduler.max_thread_count": 1,
    "index.merge.policy.max_merged_segment": "2gb",
}


@dataclass(frozen=True)
class PlannedCall:
    tool: str
    args: dict
    tags: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"tool": self.tool, "args": self.args, "tags": list(self.tags)}


@dataclass
class RemediationPlan:
    scenario: str
    trigger: str
    actions: list[PlannedCall] = field(default_factory=list)
    source: str = "precomputed"  # or "memory_match"

    def __post_init__(self) -> None:
        assert self.scenario in PLAN_SCENARIOS, f"unknown plan scenario {self.scenario}"

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "trigger": self.trigger,
            "source": self.source,
            "actions": [a.to_dict() for a in self.actions],
        }


def plan_from_forecast(forecast) -> RemediationPlan | None:
    """Map one forecast to a staged plan, or None if no plan applies."""
    if forecast.model == "disk_fill" and forecast.eta_hours is not None \
            and forecast.eta_hours < DISK_FILL_PLAN_HORIZON_H:
        # ES-level mitigation only: survey index footprints, then free what the
        # retention policy allows. Non-ES consumers of the mount are out of
        # scope for a precomputed plan and need an investigation pass.
        return RemediationPlan(
            scenario="disk_pressure",
            trigger=f"disk fill ETA {forecast.eta_hours:.2f}h on {forecast.subject}",
            actions=[
                PlannedCall("es_api", {"method": "GET", "path": "/_cat/indices"},
                            tags=("disk_pressure",)),
                PlannedCall("exec_on_node",
                            {"host": forecast.subject, "command": "du -sh /mnt/*"},
                            tags=("disk_pressure",)),
            ],
        )
    if forecast.model == "heap_trend" and forecast.eta_hours is not None \
            and forecast.eta_hours < DISK_FILL_PLAN_HORIZON_H:
        return RemediationPlan(
            scenario="heap_exhaustion",
            trigger=f"heap critical ETA {forecast.eta_hours:.2f}h on {forecast.subject}",
            actions=[
                PlannedCall("es_api", {"method": "GET", "path": "/_cat/indices"}, tags=("heap",)),
                PlannedCall("exec_on_pod",
                            {"pod": forecast.subject, "command": "curl -s localhost:9200/_nodes/stats"},
                            tags=("heap",)),
            ],
        )
    if forecast.model == "nic_risk" and forecast.risk is not None \
            and forecast.risk >= NIC_RISK_PLAN_THRESHOLD:
        return RemediationPlan(
            scenario="nic_degradation",
            trigger=f"NIC failure risk {forecast.risk:.2f} on {forecast.subject}",
            actions=[
                PlannedCall("exec_on_node",
                            {"host": forecast.subject, "command": "ethtool bond0"},
                            tags=("nic",)),
                PlannedCall("es_api_write",
                            {"method": "PUT", "path": "/_all/_settings",
                             "body": {"settings": MERGE_TRAFFIC_SETTINGS}},
                            tags=("nic",)),
            ],
        )
    return None


def plan_node_loss(snapshot) -> RemediationPlan | None:
    """Stage a node-loss plan when every pod homed on a host has been
    non-Running past the grace window."""
    from .sim.state import PodPhase  # local import avoids a module cycle

    t = snapshot.sim_time_s
    for host_id in sorted(snapshot.hosts):
        homed = [p for p in snapshot.pods.values() if p.home_host == host_id]
        if homed and all(
            p.phase is not PodPhase.RUNNING and t - p.restart_eligible_at_s > NODE_LOSS_GRACE_S
            for p in homed
        ):
            return RemediationPlan(
                scenario="node_loss",
                trigger=f"all pods on {host_id} down for > {NODE_LOSS_GRACE_S}s",
                actions=[
                    PlannedCall("kubectl", {"args": "get pods"}, tags=("disk_pressure",)),
                    PlannedCall("exec_on_node", {"host": host_id, "command": "dmesg"}, tags=()),
                ],
            )
    return None


def plan_shard_imbalance(snapshot) -> RemediationPlan | None:
    """Stage a rebalance survey when per-pod primary store bytes are skewed
    (coefficient of variation above 30%)."""
    from .sim.state import PodPhase, PodRole, ShardStatus  # local import avoids a cycle

    per_pod: dict[str, int] = {
        p.pod_id: 0
        for p in snapshot.pods.values()
        if p.role is PodRole.DATA and p.phase is PodPhase.RUNNING
    }
    if len(per_pod) < 2:
        return None
    for index in snapshot.indices.values():
        for slot in index.primaries:
            if slot.status is ShardStatus.STARTED and slot.pod in per_pod:
                per_pod[slot.pod] += index.store_bytes_per_shard
    values = list(per_pod.values())
    mean = sum(values) / len(values)
    if mean == 0:
        return None
    variance = sum((v - mean) ** 2 for v in values) / len(values)
    cv = variance**0.5 / mean
    if cv <= SHARD_IMBALANCE_CV:
        return None
    heaviest = max(per_pod, key=per_pod.get)
    return RemediationPlan(
        scenario="shard_imbalance",
        trigger=f"primary store CV {cv:.2f} across data pods (heaviest: {heaviest})",
        actions=[
            PlannedCall("es_api", {"method": "GET", "path": "/_cat/shards"}, tags=()),
        ],
    )
