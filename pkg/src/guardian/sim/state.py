"""Domain state for the simulated Elasticsearch-on-Kubernetes cluster."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum

from ..errors import ConfigurationError

GIB = 1024**3

DMESG_RING_MAX = 256
LOG_RING_MAX = 512
K8S_EVENTS_MAX = 400


class Health(str, Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"


class PodPhase(str, Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    EVICTED = "Evicted"
    TERMINATED = "Terminated"


class PodRole(str, Enum):
    MASTER = "master"
    DATA = "data"


class ShardStatus(str, Enum):
    STARTED = "STARTED"
    RECOVERING = "RECOVERING"
    UNASSIGNED = "UNASSIGNED"


class FaultKind(str, Enum):
    FOREIGN_DATA_GROWTH = "foreign_data_growth"
    NIC_DEGRADATION = "nic_degradation"
    HEAP_LEAK = "heap_leak"
    NODE_KILL = "node_kill"
    SHARD_COPY_CORRUPTION = "shard_copy_corruption"


@dataclass
class NicState:
    error_count: int = 0
    retransmit_rate: float = 0.0  # errors/second
    bond_degraded: bool = False

    def to_dict(self) -> dict:
        return {
            "error_count": self.error_count,
            "retransmit_rate": round(self.retransmit_rate, 6),
            "bond_degraded": self.bond_degraded,
        }


@dataclass
class NvmeState:
    wear_level_pct: float = 3.0
    media_errors: int = 0
    read_latency_us: float = 85.0

    def to_dict(self) -> dict:
        return {
            "wear_level_pct": round(self.wear_level_pct, 6),
            "media_errors": self.media_errors,
            "read_latency_us": round(self.read_latency_us, 6),
        }


@dataclass
class HostState:
    host_id: str
    mount_capacity_bytes: int
    es_used_bytes: int
    foreign_dirs: dict[str, int] = field(default_factory=dict)  # dir name -> bytes
    nic: NicState = field(default_factory=NicState)
    nvme: NvmeState = field(default_factory=NvmeState)
    dmesg_ring: list[str] = field(default_factory=list)
    thermal_c: float = 44.0

    @property
    def foreign_used_bytes(self) -> int:
        return sum(self.foreign_dirs.values())

    @property
    def disk_pct(self) -> float:
        return (self.es_used_bytes + self.foreign_used_bytes) / self.mount_capacity_bytes

    def append_dmesg(self, line: str) -> None:
        self.dmesg_ring.append(line)
        if len(self.dmesg_ring) > DMESG_RING_MAX:
            del self.dmesg_ring[: len(self.dmesg_ring) - DMESG_RING_MAX]

    def to_dict(self) -> dict:
        return {
            "host_id": self.host_id,
            "mount_capacity_bytes": self.mount_capacity_bytes,
            "es_used_bytes": self.es_used_bytes,
            "foreign_dirs": dict(sorted(self.foreign_dirs.items())),
            "nic": self.nic.to_dict(),
            "nvme": self.nvme.to_dict(),
            "dmesg_ring": list(self.dmesg_ring),
            "thermal_c": round(self.thermal_c, 6),
        }


@dataclass
class PodState:
    pod_id: str
    role: PodRole
    phase: PodPhase
    home_host: str  # scheduling anchor; pods rebind here when pressure clears
    host_binding: str | None
    heap_pct: float
    gc_young_count: int = 0
    log_ring: list[tuple[int, str, str]] = field(default_factory=list)  # (t_s, level, message)
    restart_eligible_at_s: int = 0

    def append_log(self, t_s: int, level: str, message: str) -> None:
        self.log_ring.append((t_s, level, message))
        if len(self.log_ring) > LOG_RING_MAX:
            del self.log_ring[: len(self.log_ring) - LOG_RING_MAX]

    def to_dict(self) -> dict:
        return {
            "pod_id": self.pod_id,
            "role": self.role.value,
            "phase": self.phase.value,
            "home_host": self.home_host,
            "host_binding": self.host_binding,
            "heap_pct": round(self.heap_pct, 6),
            "gc_young_count": self.gc_young_count,
            "log_ring": [list(entry) for entry in self.log_ring],
        }


@dataclass
class ShardSlot:
    pod: str
    status: ShardStatus = ShardStatus.STARTED

    def to_dict(self) -> dict:
        return {"pod": self.pod, "status": self.status.value}


@dataclass
class IndexState:
    index_name: str
    primary_count: int
    replica_count: int
    store_bytes_per_shard: int
    primaries: list[ShardSlot] = field(default_factory=list)
    replicas: list[ShardSlot] = field(default_factory=list)
    no_valid_shard_copy: bool = False
    segment_count: int = 0
    settings: dict = field(default_factory=dict)

    @property
    def store_bytes(self) -> int:
        return self.store_bytes_per_shard * self.primary_count

    def to_dict(self) -> dict:
        return {
            "index_name": self.index_name,
            "primary_count": self.primary_count,
            "replica_count": self.replica_count,
            "store_bytes_per_shard": self.store_bytes_per_shard,
            "primaries": [s.to_dict() for s in self.primaries],
            "replicas": [s.to_dict() for s in self.replicas],
            "no_valid_shard_copy": self.no_valid_shard_copy,
            "segment_count": self.segment_count,
            "settings": dict(sorted(self.settings.items())),
        }


@dataclass(frozen=True)
class FaultSpec:
    at_s: int
    kind: FaultKind
    params: dict

    def __post_init__(self) -> None:
        if self.at_s < 0:
            raise ConfigurationError("fault at_s must be >= 0")
        for key in ("rate_gb_per_s", "total_gb", "pct_per_h", "retransmit_slope_per_s"):
            if key in self.params and self.params[key] < 0:
                raise ConfigurationError(f"fault param {key} must be >= 0")

    def to_dict(self) -> dict:
        return {"at_s": self.at_s, "kind": self.kind.value, "params": self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "FaultSpec":
        return cls(at_s=d["at_s"], kind=FaultKind(d["kind"]), params=d.get("params", {}))


@dataclass(frozen=True)
class HostSpec:
    host_id: str
    mount_capacity_gb: float = 420.0
    es_used_gb: float = 8.4

    def to_dict(self) -> dict:
        return {
            "host_id": self.host_id,
            "mount_capacity_gb": self.mount_capacity_gb,
            "es_used_gb": self.es_used_gb,
        }


DEFAULT_HOSTS = (HostSpec("s797"), HostSpec("s811"), HostSpec("s812"))


@dataclass(frozen=True)
class ClusterSpec:
    """Static shape of the simulated cluster."""

    hosts: tuple[HostSpec, ...] = DEFAULT_HOSTS
    master_count: int = 3
    data_count: int = 12
    index_count: int = 168
    primary_shards: int = 840
    replicas_per_primary: int = 1
    gb_per_shard: float = 3.72
    es_version: str = "8.17.0"
    eviction_threshold: float = 0.85
    tuned: bool = True
    data_layout: tuple[int, ...] | None = None  # data pods per host; None = round robin
    foreign_dir_name: str = "cassandra-disk1"

    def validate(self) -> None:
        if not self.hosts:
            raise ConfigurationError("spec needs at least one host")
        if self.master_count < 1 or self.data_count < 1:
            raise ConfigurationError("spec needs at least one master and one data pod")
        if any(h.mount_capacity_gb <= 0 for h in self.hosts):
            raise ConfigurationError("host mount capacity must be > 0")
        if self.index_count < 1 or self.primary_shards < self.index_count:
            raise ConfigurationError("need >= 1 primary shard per index")
        if self.data_layout is not None:
            if len(self.data_layout) != len(self.hosts) or sum(self.data_layout) != self.data_count:
                raise ConfigurationError("data_layout must list per-host counts summing to data_count")
        if not 0 < self.eviction_threshold <= 1:
            raise ConfigurationError("eviction_threshold must be in (0, 1]")

    def to_dict(self) -> dict:
        d = {
            "hosts": [h.to_dict() for h in self.hosts],
            "master_count": self.master_count,
            "data_count": self.data_count,
            "index_count": self.index_count,
            "primary_shards": self.primary_shards,
            "replicas_per_primary": self.replicas_per_primary,
            "gb_per_shard": self.gb_per_shard,
            "es_version": self.es_version,
            "eviction_threshold": self.eviction_threshold,
            "tuned": self.tuned,
            "foreign_dir_name": self.foreign_dir_name,
        }
        if self.data_layout is not None:
            d["data_layout"] = list(self.data_layout)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterSpec":
        d = dict(d)
        if "hosts" in d:
            d["hosts"] = tuple(HostSpec(**h) for h in d["hosts"])
        if d.get("data_layout") is not None:
            d["data_layout"] = tuple(d["data_layout"])
        return cls(**d)


@dataclass
class SimEvent:
    at_s: int
    kind: str
    subject: str
    detail: str

    def to_dict(self) -> dict:
        return {"at_s": self.at_s, "kind": self.kind, "subject": self.subject, "detail": self.detail}


@dataclass
class ClusterState:
    """Full simulated world; mutated only through the Cluster driver."""

    sim_time_s: int
    rng_seed: int
    es_version: str
    eviction_threshold: float
    tuned: bool
    foreign_dir_name: str
    hosts: dict[str, HostState]
    pods: dict[str, PodState]
    indices: dict[str, IndexState]
    quorum: bool = True
    health: Health = Health.GREEN
    master_count: int = 3
    k8s_events: list[tuple[int, str]] = field(default_factory=list)

    def add_k8s_event(self, t_s: int, text: str) -> None:
        self.k8s_events.append((t_s, text))
        if len(self.k8s_events) > K8S_EVENTS_MAX:
            del self.k8s_events[: len(self.k8s_events) - K8S_EVENTS_MAX]

    def running_masters(self) -> int:
        return sum(
            1 for p in self.pods.values() if p.role is PodRole.MASTER and p.phase is PodPhase.RUNNING
        )

    def data_pods(self) -> list[PodState]:
        return [p for p in self.pods.values() if p.role is PodRole.DATA]

    def pending_pods(self) -> list[PodState]:
        return [p for p in self.pods.values() if p.phase is PodPhase.PENDING]

    def gb_per_shard(self) -> float:
        shards = sum(ix.primary_count for ix in self.indices.values())
        if shards == 0:
            return 0.0
        total = sum(ix.store_bytes for ix in self.indices.values())
        return total / shards / GIB

    def primary_shard_count(self) -> int:
        return sum(ix.primary_count for ix in self.indices.values())

    def to_dict(self) -> dict:
        return {
            "sim_time_s": self.sim_time_s,
            "rng_seed": self.rng_seed,
            "es_version": self.es_version,
            "eviction_threshold": self.eviction_threshold,
            "tuned": self.tuned,
            "quorum": self.quorum,
            "health": self.health.value,
            "hosts": {k: v.to_dict() for k, v in sorted(self.hosts.items())},
            "pods": {k: v.to_dict() for k, v in sorted(self.pods.items())},
            "indices": {k: v.to_dict() for k, v in sorted(self.indices.items())},
        }

    def content_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()
