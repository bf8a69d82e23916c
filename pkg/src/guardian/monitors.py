"""Rule-based monitoring layers and the severity-routed alert bus.

Three scan layers run at the fast cadence and cost nothing beyond a
snapshot walk: hardware (layer -1), Kubernetes (layer 0) and ES rules
(layer 1). All scans are pure functions of (snapshot, thresholds); the
same snapshot always yields the same alert multiset.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import IntEnum

from .perfmodel import Baselines
from .sim.state import ClusterState, Health, PodPhase, PodRole


class Severity(IntEnum):
    INFO = 0
    WARNING = 1
    CRITICAL = 2


# Closed alert-code set; incident signatures depend on these staying stable.
ALERT_CODES = frozenset(
    {
        "nvme_latency_high",
        "nvme_media_errors",
        "dmesg_io_error",
        "nic_degradation",
        "thermal_high",
        "quorum_lost",
        "pods_pending",
        "disk_high",
        "heap_pressure",
        "segment_count_high",
        "es_log_errors",
        "probe_deviation",
        "cluster_red",
        "cluster_yellow",
        "plan_denied",
    }
)

_DMESG_ERROR_RE = re.compile(r"(i/o error|blk_update_request|nvme.*(timeout|reset)|watchdog.*timed out)", re.I)


@dataclass(frozen=True)
class Alert:
    severity: Severity
    layer: int  # -1, 0, 1 or 2
    code: str
    subject: str
    message: str
    at_s: int

    def __post_init__(self) -> None:
        assert self.code in ALERT_CODES, f"unknown alert code {self.code}"

    def to_dict(self) -> dict:
        return {
            "severity": self.severity.name,
            "layer": self.layer,
            "code": self.code,
            "subject": self.subject,
            "message": self.message,
            "at_s": self.at_s,
        }


@dataclass(frozen=True)
class RuleThresholds:
    heap_warn_pct: float = 85.0
    heap_crit_pct: float = 90.0
    disk_warn_pct: float = 80.0
    nvme_latency_warn_us: float = 500.0
    retransmit_warn_rate: float = 10.0
    thermal_warn_c: float = 85.0
    pending_pods_crit: int = 3
    segment_count_warn: int = 1000
    deviation_warn_factor: float = 2.0

    def __post_init__(self) -> None:
        if self.heap_warn_pct >= self.heap_crit_pct:
            raise ValueError("heap_warn_pct must be below heap_crit_pct")

    @classmethod
    def from_dict(cls, d: dict) -> "RuleThresholds":
        return cls(**d)


def scan_hardware(snapshot: ClusterState, thresholds: RuleThresholds) -> list[Alert]:
    """Layer -1: NVMe, dmesg, NIC bond and thermal checks per host."""
    t = snapshot.sim_time_s
    alerts: list[Alert] = []
    for host_id in sorted(snapshot.hosts):
        host = snapshot.hosts[host_id]
        if host.nvme.read_latency_us > thresholds.nvme_latency_warn_us:
            alerts.append(Alert(Severity.WARNING, -1, "nvme_latency_high", host_id,
                                f"NVMe read latency {host.nvme.read_latency_us:.0f}us", t))
        if host.nvme.media_errors > 0:
            alerts.append(Alert(Severity.WARNING, -1, "nvme_media_errors", host_id,
                                f"{host.nvme.media_errors} NVMe media errors", t))
        if any(_DMESG_ERROR_RE.search(line) for line in host.dmesg_ring):
            alerts.append(Alert(Severity.WARNING, -1, "dmesg_io_error", host_id,
                                "kernel I/O error pattern in dmesg", t))
        if host.nic.bond_degraded or host.nic.retransmit_rate > thresholds.retransmit_warn_rate:
            detail = "bond degraded to single-NIC mode" if host.nic.bond_degraded else \
                f"TCP retransmit rate {host.nic.retransmit_rate:.2f}/s"
            alerts.append(Alert(Severity.WARNING, -1, "nic_degradation", host_id, detail, t))
        if host.thermal_c > thresholds.thermal_warn_c:
            alerts.append(Alert(Severity.WARNING, -1, "thermal_high", host_id,
                                f"CPU package at {host.thermal_c:.0f}C", t))
    return alerts


def scan_kubernetes(snapshot: ClusterState, thresholds: RuleThresholds) -> list[Alert]:
    """Layer 0: pod status, node disk condition, master quorum."""
    t = snapshot.sim_time_s
    alerts: list[Alert] = []
    pending = sorted(p.pod_id for p in snapshot.pods.values() if p.phase is PodPhase.PENDING)
    if len(pending) >= thresholds.pending_pods_crit:
        alerts.append(Alert(Severity.CRITICAL, 0, "pods_pending", "cluster",
                            f"{len(pending)} pods Pending: {', '.join(pending[:6])}...", t))
    elif pending:
        alerts.append(Alert(Severity.WARNING, 0, "pods_pending", pending[0],
                            f"{len(pending)} pod(s) Pending", t))
    if not snapshot.quorum:
        running = snapshot.running_masters()
        alerts.append(Alert(Severity.CRITICAL, 0, "quorum_lost", "cluster",
                            f"master quorum lost ({running}/{snapshot.master_count} running)", t))
    for host_id in sorted(snapshot.hosts):
        host = snapshot.hosts[host_id]
        if host.disk_pct * 100 >= thresholds.disk_warn_pct:
            alerts.append(Alert(Severity.WARNING, 0, "disk_high", host_id,
                                f"data mount at {host.disk_pct * 100:.1f}%", t))
    return alerts


def scan_es_rules(
    snapshot: ClusterState,
    thresholds: RuleThresholds,
    baselines: Baselines | None = None,
    measured_p50_ms: dict[str, float] | None = None,
) -> list[Alert]:
    """Layer 1: heap/segment/log thresholds plus probe deviation vs baselines.

    Deviation checks are skipped until baselines exist (pre-calibration).
    """
    t = snapshot.sim_time_s
    alerts: list[Alert] = []
    for pod_id in sorted(snapshot.pods):
        pod = snapshot.pods[pod_id]
        if pod.phase is not PodPhase.RUNNING:
            continue
        if pod.heap_pct >= thresholds.heap_crit_pct:
            alerts.append(Alert(Severity.CRITICAL, 1, "heap_pressure", pod_id,
                                f"heap at {pod.heap_pct:.1f}%", t))
        elif pod.heap_pct >= thresholds.heap_warn_pct:
            alerts.append(Alert(Severity.WARNING, 1, "heap_pressure", pod_id,
                                f"heap at {pod.heap_pct:.1f}%", t))
        recent_errors = sum(1 for ts, level, _ in pod.log_ring[-50:] if level == "ERROR")
        if recent_errors >= 5:
            alerts.append(Alert(Severity.WARNING, 1, "es_log_errors", pod_id,
                                f"{recent_errors} ERROR lines in recent log window", t))
    for name in sorted(snapshot.indices):
        index = snapshot.indices[name]
        if index.segment_count > thresholds.segment_count_warn:
            alerts.append(Alert(Severity.WARNING, 1, "segment_count_high", name,
                                f"{index.segment_count} segments", t))
    if snapshot.health is Health.RED:
        alerts.append(Alert(Severity.CRITICAL, 1, "cluster_red", "cluster", "cluster health RED", t))
    elif snapshot.health is Health.YELLOW:
        alerts.append(Alert(Severity.INFO, 1, "cluster_yellow", "cluster", "cluster health YELLOW", t))
    if baselines is not None and measured_p50_ms:
        for probe in sorted(measured_p50_ms):
            baseline = baselines.probes.get(probe)
            if baseline is None:
                continue
            measured = measured_p50_ms[probe]
            if measured > thresholds.deviation_warn_factor * baseline.p50_ms:
                alerts.append(Alert(Severity.WARNING, 1, "probe_deviation", probe,
                                    f"p50 {measured:.1f}ms vs baseline {baseline.p50_ms:.1f}ms", t))
    return alerts


@dataclass
class RoutingDecision:
    trigger_ai_loop: bool
    attached_warnings: list[Alert] = field(default_factory=list)
    logged_info: list[Alert] = field(default_factory=list)


def dispatch(alerts: list[Alert], scheduler) -> RoutingDecision:
    """Route alerts: CRITICAL preempts the AI loop, WARNING rides the next
    scheduled cycle, INFO is logged only. No alert is dropped or downgraded."""
    criticals = [a for a in alerts if a.severity is Severity.CRITICAL]
    warnings = [a for a in alerts if a.severity is Severity.WARNING]
    infos = [a for a in alerts if a.severity is Severity.INFO]
    if criticals:
        scheduler.preempt(criticals)
    if warnings:
        scheduler.attach_warnings(warnings)
    return RoutingDecision(trigger_ai_loop=bool(criticals), attached_warnings=warnings, logged_info=infos)
