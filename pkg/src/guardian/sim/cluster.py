"""Deterministic discrete-event cluster simulator with scripted fault injection.

One driver mutates state exclusively through :class:`Cluster` methods; the
minimum time granularity is one simulated second. Identical (seed, spec,
fault schedule, tick sequence) produce an identical event log.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, ProbeUnavailableError, TargetError
from ..perfmodel import ScalingCoefficients, query_latency, sim_probe_coefficients, write_latency
from ..perfmodel import UNTUNED_LATENCY_MULTIPLIER
from . import emulation
from .state import (
    GIB,
    ClusterSpec,
    ClusterState,
    FaultKind,
    FaultSpec,
    Health,
    HostState,
    IndexState,
    PodPhase,
    PodRole,
    PodState,
    ShardSlot,
    ShardStatus,
    SimEvent,
)

TUNED_SETTINGS = {"refresh_interval": "30s", "translog.durability": "async"}

PROBE_FACTORS = {
    "term_status": 1.0,
    "match_all": 0.9,
    "range_timestamp": 0.6,
    "bool_compound": 1.05,
}

NIC_DEGRADATION_PENALTY = 1.2  # below the 2.0 deviation alert factor by design
HEAP_PRESSURE_PENALTY = 1.3
HEAP_PENALTY_THRESHOLD_PCT = 90.0

LATENCY_NOISE_SIGMA = 0.10


@dataclass
class ActiveFault:
    spec: FaultSpec
    applied_bytes: int = 0
    fired: bool = False
    bond_degraded_applied: bool = False


def derive_health(state: ClusterState) -> Health:
    """Health is a pure function of shard assignment plus quorum."""
    if not state.quorum:
        return Health.RED
    for index in state.indices.values():
        if index.no_valid_shard_copy:
            return Health.RED
        for slot in index.primaries:
            if slot.status is not ShardStatus.STARTED:
                return Health.RED
    for index in state.indices.values():
        for slot in index.replicas:
            if slot.status is not ShardStatus.STARTED:
                return Health.YELLOW
    return Health.GREEN


def _build_state(spec: ClusterSpec, seed: int) -> ClusterState:
    spec.validate()
    hosts = {
        h.host_id: HostState(
            host_id=h.host_id,
            mount_capacity_bytes=int(h.mount_capacity_gb * GIB),
            es_used_bytes=int(h.es_used_gb * GIB),
        )
        for h in spec.hosts
    }
    for host in hosts.values():
        if host.es_used_bytes > host.mount_capacity_bytes:
            raise ConfigurationError(f"{host.host_id}: es_used exceeds mount capacity")
        host.append_dmesg("[    0.000000] Linux version 5.15.0 (guardian-sim)")
        host.append_dmesg("[    2.113310] nvme nvme0: allocated 64 MiB host memory buffer")

    host_ids = [h.host_id for h in spec.hosts]
    pods: dict[str, PodState] = {}
    for i in range(spec.master_count):
        host = host_ids[i % len(host_ids)]
        pods[f"es-master-{i}"] = PodState(
            pod_id=f"es-master-{i}",
            role=PodRole.MASTER,
            phase=PodPhase.RUNNING,
            home_host=host,
            host_binding=host,
            heap_pct=42.0,
        )
    if spec.data_layout is not None:
        data_hosts: list[str] = []
        for host, count in zip(host_ids, spec.data_layout):
            data_hosts.extend([host] * count)
    else:
        data_hosts = [host_ids[i % len(host_ids)] for i in range(spec.data_count)]
    for i in range(spec.data_count):
        pods[f"es-data-{i}"] = PodState(
            pod_id=f"es-data-{i}",
            role=PodRole.DATA,
            phase=PodPhase.RUNNING,
            home_host=data_hosts[i],
            host_binding=data_hosts[i],
            heap_pct=58.0,
        )

    data_pod_ids = [f"es-data-{i}" for i in range(spec.data_count)]
    indices: dict[str, IndexState] = {}
    per_index = spec.primary_shards // spec.index_count
    remainder = spec.primary_shards % spec.index_count
    shard_cursor = 0
    for i in range(spec.index_count):
        name = f"idx-{i:03d}"
        primary_count = per_index + (1 if i < remainder else 0)
        primaries, replicas = [], []
        for _ in range(primary_count):
            primary_pod = data_pod_ids[shard_cursor % len(data_pod_ids)]
            primaries.append(ShardSlot(pod=primary_pod))
            for r in range(spec.replicas_per_primary):
                replica_pod = data_pod_ids[(shard_cursor + 1 + r) % len(data_pod_ids)]
                replicas.append(ShardSlot(pod=replica_pod))
            shard_cursor += 1
        indices[name] = IndexState(
            index_name=name,
            primary_count=primary_count,
            replica_count=spec.replicas_per_primary,
            store_bytes_per_shard=int(spec.gb_per_shard * GIB),
            primaries=primaries,
            replicas=replicas,
            segment_count=primary_count * 24,
            settings=dict(TUNED_SETTINGS) if spec.tuned else {},
        )

    return ClusterState(
        sim_time_s=0,
        rng_seed=seed,
        es_version=spec.es_version,
        eviction_threshold=spec.eviction_threshold,
        tuned=spec.tuned,
        foreign_dir_name=spec.foreign_dir_name,
        hosts=hosts,
        pods=pods,
        indices=indices,
        master_count=spec.master_count,
    )


class Cluster:
    """Single-threaded deterministic state machine over :class:`ClusterState`."""

    def __init__(self, spec: ClusterSpec, seed: int = 42, zero_noise: bool = False):
        self.spec = spec
        self.state = _build_state(spec, seed)
        self.noise_sigma = 0.0 if zero_noise else LATENCY_NOISE_SIGMA
        self._rng = np.random.default_rng(seed)
        self._faults: list[ActiveFault] = []
        self._events: list[SimEvent] = []
        self._index_defaults = (
            spec.primary_shards // spec.index_count,
            spec.replicas_per_primary,
        )
        self._emit(0, "cluster_created", "cluster", f"{len(self.state.pods)} pods, {len(self.state.indices)} indices")

    @classmethod
    def from_spec(cls, spec: ClusterSpec | None = None, seed: int = 42, zero_noise: bool = False) -> "Cluster":
        return cls(spec or ClusterSpec(), seed=seed, zero_noise=zero_noise)

    # -- observation ---------------------------------------------------------

    def health(self) -> Health:
        return self.state.health

    def snapshot(self) -> ClusterState:
        """Immutable copy, safe to hand to monitors/predictors."""
        return copy.deepcopy(self.state)

    def state_hash(self) -> str:
        return self.state.content_hash()

    def drain_events(self) -> list[SimEvent]:
        events, self._events = self._events, []
        return events

    def _emit(self, t: int, kind: str, subject: str, detail: str) -> None:
        self._events.append(SimEvent(at_s=t, kind=kind, subject=subject, detail=detail))

    # -- fault injection -----------------------------------------------------

    def inject_fault(self, fault: FaultSpec) -> None:
        params = fault.params
        if fault.kind is FaultKind.FOREIGN_DATA_GROWTH and params.get("host") not in self.state.hosts:
            raise TargetError(f"unknown host {params.get('host')!r}")
        if fault.kind in (FaultKind.HEAP_LEAK, FaultKind.NODE_KILL) and params.get("pod") not in self.state.pods:
            raise TargetError(f"unknown pod {params.get('pod')!r}")
        if fault.kind is FaultKind.NIC_DEGRADATION:
            targets = params.get("hosts", "all")
            if targets != "all" and any(h not in self.state.hosts for h in targets):
                raise TargetError(f"unknown host in {targets!r}")
        self._faults.append(ActiveFault(spec=fault))
        self._emit(self.state.sim_time_s, "fault_registered", fault.kind.value, str(sorted(params.items())))

    # -- time advance --------------------------------------------------------

    def tick(self, dt_s: int) -> list[SimEvent]:
        """Advance simulated time by ``dt_s`` seconds; returns emitted events."""
        if dt_s <= 0:
            raise ConfigurationError("dt_s must be > 0")
        for _ in range(int(dt_s)):
            self._step()
        return self.drain_events()

    def _step(self) -> None:
        state = self.state
        state.sim_time_s += 1
        t = state.sim_time_s
        for fault in self._faults:
            if t >= fault.spec.at_s:
                self._apply_fault(fault, t)
        if t % 60 == 0:
            for pod in state.pods.values():
                if pod.phase is PodPhase.RUNNING:
                    pod.append_log(t, "INFO", "health ping ok")
        if t % 30 == 0:
            for pod in state.pods.values():
                if pod.phase is PodPhase.RUNNING and pod.role is PodRole.DATA:
                    pod.gc_young_count += 1
            if any(ix.no_valid_shard_copy for ix in state.indices.values()):
                for pod in state.pods.values():
                    if pod.phase is PodPhase.RUNNING and pod.role is PodRole.MASTER:
                        pod.append_log(t, "ERROR", "failed to allocate shard: no_valid_shard_copy")
        self._controller_pass(t)

    def _apply_fault(self, fault: ActiveFault, t: int) -> None:
        state = self.state
        kind = fault.spec.kind
        params = fault.spec.params
        if kind is FaultKind.FOREIGN_DATA_GROWTH:
            host = state.hosts[params["host"]]
            total = int(params["total_gb"] * GIB)
            rate = int(params.get("rate_gb_per_s", 0.5) * GIB)
            if fault.applied_bytes >= total:
                return
            dir_name = params.get("dir", state.foreign_dir_name)
            headroom = host.mount_capacity_bytes - host.es_used_bytes - host.foreign_used_bytes
            delta = min(rate, total - fault.applied_bytes, headroom)
            if delta > 0:
                host.foreign_dirs[dir_name] = host.foreign_dirs.get(dir_name, 0) + delta
                fault.applied_bytes += delta
                if fault.applied_bytes >= total:
                    self._emit(t, "fault_complete", host.host_id, f"foreign growth reached {params['total_gb']} GB")
        elif kind is FaultKind.NIC_DEGRADATION:
            targets = params.get("hosts", "all")
            hosts = state.hosts.values() if targets == "all" else [state.hosts[h] for h in targets]
            slope = params.get("retransmit_slope_per_s", 0.01)
            degrade_after = params.get("bond_degrade_after_s")
            for host in hosts:
                host.nic.retransmit_rate += slope
                host.nic.error_count += max(1, int(host.nic.retransmit_rate))
                if degrade_after is not None and t >= fault.spec.at_s + degrade_after and not host.nic.bond_degraded:
                    host.nic.bond_degraded = True
                    host.append_dmesg(f"[{t:>5}.000000] bond0: link status down for interface eno2np1")
                    self._emit(t, "bond_degraded", host.host_id, "bond fell back to single-NIC mode")
                if t % 120 == 0:
                    host.append_dmesg(f"[{t:>5}.000000] eno2np1: NETDEV WATCHDOG: transmit queue timed out")
        elif kind is FaultKind.HEAP_LEAK:
            pod = state.pods[params["pod"]]
            pod.heap_pct = min(100.0, pod.heap_pct + params.get("pct_per_h", 5.0) / 3600.0)
        elif kind is FaultKind.NODE_KILL:
            if not fault.fired:
                fault.fired = True
                pod = state.pods[params["pod"]]
                pod.phase = PodPhase.TERMINATED
                pod.host_binding = None
                pod.restart_eligible_at_s = t + int(params.get("down_s", 0)) + 1
                self._emit(t, "node_kill", pod.pod_id, "pod terminated by fault")
        elif kind is FaultKind.SHARD_COPY_CORRUPTION:
            if not fault.fired:
                fault.fired = True
                if "indices" in params:
                    names = list(params["indices"])
                else:
                    names = sorted(state.indices)[: int(params["index_count"])]
                for name in names:
                    if name not in state.indices:
                        raise TargetError(f"unknown index {name!r}")
                    index = state.indices[name]
                    index.no_valid_shard_copy = True
                    for slot in index.primaries + index.replicas:
                        slot.status = ShardStatus.UNASSIGNED
                self._emit(t, "shard_copy_corruption", "indices", f"{len(names)} indices lost all valid shard copies")

    # -- kubernetes controller emulation -------------------------------------

    def _controller_pass(self, t: int) -> None:
        state = self.state
        pressured = {
            h.host_id for h in state.hosts.values() if h.disk_pct >= state.eviction_threshold
        }
        for pod in sorted(state.pods.values(), key=lambda p: p.pod_id):
            if pod.phase is PodPhase.RUNNING and pod.host_binding in pressured:
                pod.phase = PodPhase.PENDING
                host = pod.host_binding
                pod.host_binding = None
                self._emit(t, "pod_evicted", pod.pod_id, f"DiskPressure on {host}")
                state.add_k8s_event(
                    t, f"Warning  FailedScheduling  pod/{pod.pod_id}  "
                       f"0/{len(state.hosts)} nodes are available: node(s) had untolerated taint "
                       f"{{node.kubernetes.io/disk-pressure}} on {host}"
                )
            elif pod.phase is PodPhase.TERMINATED and t >= pod.restart_eligible_at_s:
                pod.phase = PodPhase.PENDING
                self._emit(t, "pod_recreated", pod.pod_id, "restart after termination")
            elif pod.phase is PodPhase.PENDING:
                if pod.home_host not in pressured:
                    pod.phase = PodPhase.RUNNING
                    pod.host_binding = pod.home_host
                    # Rescheduling restarts the process: fresh heap and GC stats.
                    pod.heap_pct = 58.0 if pod.role is PodRole.DATA else 42.0
                    pod.gc_young_count = 0
                    self._emit(t, "pod_scheduled", pod.pod_id, f"bound to {pod.home_host}")
                elif t % 30 == 0:
                    state.add_k8s_event(
                        t, f"Warning  FailedScheduling  pod/{pod.pod_id}  "
                           f"node(s) had untolerated taint {{node.kubernetes.io/disk-pressure}}"
                    )

        quorum = state.running_masters() >= state.master_count // 2 + 1
        if quorum != state.quorum:
            state.quorum = quorum
            self._emit(t, "quorum_changed", "masters", f"quorum={'restored' if quorum else 'lost'}")

        running = {p.pod_id for p in state.pods.values() if p.phase is PodPhase.RUNNING}
        for index in state.indices.values():
            if index.no_valid_shard_copy:
                continue
            for slot in index.primaries:
                if slot.pod not in running:
                    slot.status = ShardStatus.UNASSIGNED
                elif slot.status is not ShardStatus.STARTED:
                    slot.status = ShardStatus.STARTED
            primaries_ok = all(s.status is ShardStatus.STARTED for s in index.primaries)
            for slot in index.replicas:
                if slot.pod not in running or not primaries_ok:
                    slot.status = ShardStatus.UNASSIGNED
                elif slot.status is ShardStatus.RECOVERING:
                    slot.status = ShardStatus.STARTED
                elif slot.status is ShardStatus.UNASSIGNED:
                    slot.status = ShardStatus.RECOVERING

        health = derive_health(state)
        if health is not state.health:
            self._emit(t, "health_changed", "cluster", f"{state.health.value} -> {health.value}")
            state.health = health

    # -- emulated command surfaces -------------------------------------------

    def exec_host_command(self, host_id: str, cmd: str) -> str:
        return emulation.host_command(self.state, host_id, cmd)

    def exec_es_api(self, method: str, path: str, body: dict | None = None):
        result = emulation.es_api(self.state, method, path, body, self._index_defaults)
        self.state.health = derive_health(self.state)
        return result

    def exec_kubectl(self, args: str) -> str:
        return emulation.kubectl(self.state, args)

    def exec_pod_command(self, pod_id: str, cmd: str) -> str:
        return emulation.pod_command(self.state, pod_id, cmd)

    # -- latency probes ------------------------------------------------------

    def run_probe(self, probe: str, docs: int = 100, replicas: int | None = None,
                  coeffs: ScalingCoefficients | None = None) -> float:
        """Measured probe latency in ms at the current operating point."""
        if self.state.health is Health.RED:
            raise ProbeUnavailableError("cluster is RED; probes unavailable")
        coeffs = coeffs or sim_probe_coefficients()
        if probe == "write_bulk":
            if replicas is None:
                replicas = self.spec.replicas_per_primary
            latency = write_latency(docs, replicas, coeffs)
        elif probe in PROBE_FACTORS:
            latency = query_latency(
                self.state.gb_per_shard(), self.state.primary_shard_count(), coeffs
            ) * PROBE_FACTORS[probe]
        else:
            raise ConfigurationError(f"unknown probe {probe!r}")
        if not self.state.tuned:
            latency *= UNTUNED_LATENCY_MULTIPLIER
        if any(h.nic.bond_degraded for h in self.state.hosts.values()):
            latency *= NIC_DEGRADATION_PENALTY
        if any(p.heap_pct >= HEAP_PENALTY_THRESHOLD_PCT for p in self.state.data_pods()):
            latency *= HEAP_PRESSURE_PENALTY
        if self.noise_sigma > 0:
            latency *= float(np.exp(self._rng.normal(0.0, self.noise_sigma)))
        return latency
