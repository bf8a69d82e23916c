"""Emulated command and API surfaces over the simulated cluster state.

Outputs are stable text templates so they can be golden-tested. Mutating
surfaces (rm, index delete/create, settings, pod delete) change state
directly; health is recomputed by the caller.
"""

from __future__ import annotations

from ..errors import NotFoundError, RequestError, TargetError, UnsupportedCommandError
from .state import (
    GIB,
    ClusterState,
    Health,
    IndexState,
    PodPhase,
    PodRole,
    ShardSlot,
    ShardStatus,
)

ES_MOUNT = "es-data"


def _gb(n_bytes: int) -> float:
    return n_bytes / GIB


def host_command(state: ClusterState, host_id: str, cmd: str) -> str:
    if host_id not in state.hosts:
        raise TargetError(f"unknown host {host_id!r}")
    host = state.hosts[host_id]
    words = cmd.split()
    if not words:
        raise UnsupportedCommandError("empty command")
    name = words[0]

    if name == "df":
        size = round(_gb(host.mount_capacity_bytes))
        used = host.es_used_bytes + host.foreign_used_bytes
        avail = round(_gb(host.mount_capacity_bytes - used))
        pct = round(host.disk_pct * 100)
        return (
            "Filesystem      Size  Used Avail Use% Mounted on\n"
            f"/dev/nvme0n1p2  {size}G  {round(_gb(used))}G  {avail}G  {pct}% /mnt/{ES_MOUNT}"
        )
    if name == "du":
        lines = [f"{round(_gb(n))}G\t/mnt/{d}" for d, n in sorted(host.foreign_dirs.items())]
        lines.append(f"{_gb(host.es_used_bytes):.1f}G\t/mnt/{ES_MOUNT}")
        return "\n".join(lines)
    if name == "dmesg":
        return "\n".join(host.dmesg_ring)
    if name in ("smart", "nvme"):
        return (
            "SMART/Health Information (NVMe Log 0x02)\n"
            f"Percentage Used:                    {host.nvme.wear_level_pct:.0f}%\n"
            f"Media and Data Integrity Errors:    {host.nvme.media_errors}\n"
            f"Read Latency:                       {host.nvme.read_latency_us:.0f} us\n"
            f"Temperature:                        {host.thermal_c:.0f} C"
        )
    if name in ("ethtool", "bond"):
        status = "degraded (single-NIC mode)" if host.nic.bond_degraded else "healthy"
        eno2 = "down" if host.nic.bond_degraded else "up"
        return (
            "Bonding Mode: IEEE 802.3ad Dynamic link aggregation\n"
            "Slave Interface: eno1np0\n  MII Status: up\n"
            f"Slave Interface: eno2np1\n  MII Status: {eno2}\n"
            f"TCP Retransmit Rate: {host.nic.retransmit_rate:.2f}/s\n"
            f"NIC Errors: {host.nic.error_count}\n"
            f"Bond Status: {status}"
        )
    if name == "rm":
        targets = [w for w in words[1:] if not w.startswith("-")]
        if len(targets) != 1:
            raise UnsupportedCommandError(f"rm expects one target, got {targets}")
        target = targets[0].rstrip("/")
        if not target.startswith("/mnt/"):
            raise UnsupportedCommandError(f"rm emulated only for /mnt data directories, got {target}")
        dir_name = target.split("/mnt/", 1)[1]
        if dir_name == ES_MOUNT:
            raise UnsupportedCommandError("refusing to emulate rm of the ES data mount")
        if dir_name not in host.foreign_dirs:
            raise UnsupportedCommandError(f"no such directory /mnt/{dir_name}")
        freed = host.foreign_dirs.pop(dir_name)
        return f"removed /mnt/{dir_name} ({round(_gb(freed))}G freed)"
    raise UnsupportedCommandError(f"command {name!r} is not emulated")


def pod_command(state: ClusterState, pod_id: str, cmd: str) -> str:
    if pod_id not in state.pods:
        raise TargetError(f"unknown pod {pod_id!r}")
    pod = state.pods[pod_id]
    if cmd.startswith("logs") or cmd.startswith("tail"):
        return "\n".join(f"[{t}s] {level} {msg}" for t, level, msg in pod.log_ring[-50:])
    if "9200" in cmd or cmd.startswith("curl"):
        return (
            f'{{"status":"{state.health.value}","node":"{pod_id}",'
            f'"heap_percent":{pod.heap_pct:.1f},"gc_young_count":{pod.gc_young_count}}}'
        )
    raise UnsupportedCommandError(f"pod command {cmd!r} is not emulated")


# -- elasticsearch API ------------------------------------------------------


def _split_index_names(raw: str) -> list[str]:
    names = [n for n in raw.split(",") if n]
    if not names:
        raise RequestError("no index name given")
    for name in names:
        if "*" in name or name == "_all" or name.startswith("_"):
            raise RequestError(f"index operations require specific names, got {name!r}")
    return names


def _recompute_tuned(state: ClusterState) -> None:
    state.tuned = bool(state.indices) and all(
        ix.settings.get("refresh_interval") == "30s"
        and ix.settings.get("translog.durability") == "async"
        for ix in state.indices.values()
    )


def es_api(state: ClusterState, method: str, path: str, body: dict | None,
           index_defaults: tuple[int, int]):
    method = method.upper()
    path = path.split("?", 1)[0].rstrip("/") or "/"
    body = body or {}

    if method == "GET" and path == "/_cluster/health":
        unassigned = sum(
            1
            for ix in state.indices.values()
            for slot in ix.primaries + ix.replicas
            if slot.status is not ShardStatus.STARTED
        )
        return {
            "cluster_name": "guardian-sim",
            "status": state.health.value,
            "number_of_nodes": sum(1 for p in state.pods.values() if p.phase is PodPhase.RUNNING),
            "active_primary_shards": sum(
                1 for ix in state.indices.values() for s in ix.primaries if s.status is ShardStatus.STARTED
            ),
            "unassigned_shards": unassigned,
            "timed_out": False,
        }

    if method == "GET" and path == "/_cat/shards":
        rows = []
        for name in sorted(state.indices):
            index = state.indices[name]
            for shard_id, slot in enumerate(index.primaries):
                rows.append(_shard_row(index, shard_id, "p", slot))
            for shard_id, slot in enumerate(index.replicas):
                rows.append(_shard_row(index, shard_id, "r", slot))
        return rows

    if method == "GET" and path == "/_cat/indices":
        return [
            {
                "index": name,
                "pri": ix.primary_count,
                "rep": ix.replica_count,
                "store.size": f"{_gb(ix.store_bytes):.1f}gb",
                "health": _index_health(ix),
            }
            for name, ix in sorted(state.indices.items())
        ]

    if method == "POST" and path == "/_cluster/reroute":
        moved = 0
        for command in body.get("commands", []):
            move = command.get("move")
            if not move:
                continue
            index = state.indices.get(move["index"])
            if index is None:
                raise RequestError(f"unknown index {move['index']!r}")
            shard = int(move.get("shard", 0))
            if shard >= index.primary_count:
                raise RequestError(f"shard {shard} out of range")
            index.primaries[shard] = ShardSlot(pod=move["to_node"], status=ShardStatus.UNASSIGNED)
            moved += 1
        return {"acknowledged": True, "moved": moved}

    if method == "PUT" and path.endswith("/_settings"):
        target = path[: -len("/_settings")].lstrip("/")
        settings = body.get("settings", body)
        if target in ("", "_all"):
            targets = list(state.indices.values())
        else:
            targets = [state.indices[n] for n in _split_index_names(target) if n in state.indices]
            missing = [n for n in _split_index_names(target) if n not in state.indices]
            if missing:
                raise RequestError(f"unknown indices {missing}")
        for index in targets:
            index.settings.update(settings)
        _recompute_tuned(state)
        return {"acknowledged": True, "updated_indices": len(targets)}

    if method == "DELETE":
        names = _split_index_names(path.lstrip("/"))
        missing = [n for n in names if n not in state.indices]
        if missing:
            raise RequestError(f"unknown indices {missing}")
        for name in names:
            del state.indices[name]
        return {"acknowledged": True, "deleted": names}

    if method == "PUT":
        names = _split_index_names(path.lstrip("/"))
        existing = [n for n in names if n in state.indices]
        if existing:
            raise RequestError(f"indices already exist: {existing}")
        running_data = sorted(
            p.pod_id for p in state.pods.values() if p.role is PodRole.DATA and p.phase is PodPhase.RUNNING
        )
        if not running_data:
            raise RequestError("no running data pods to host new indices")
        settings = body.get("settings", {})
        primary_count = int(settings.get("number_of_shards", index_defaults[0]))
        replica_count = int(settings.get("number_of_replicas", index_defaults[1]))
        cursor = 0
        for name in names:
            primaries, replicas = [], []
            for _ in range(primary_count):
                primaries.append(ShardSlot(pod=running_data[cursor % len(running_data)], status=ShardStatus.UNASSIGNED))
                for r in range(replica_count):
                    replicas.append(
                        ShardSlot(pod=running_data[(cursor + 1 + r) % len(running_data)], status=ShardStatus.UNASSIGNED)
                    )
                cursor += 1
            state.indices[name] = IndexState(
                index_name=name,
                primary_count=primary_count,
                replica_count=replica_count,
                store_bytes_per_shard=0,
                primaries=primaries,
                replicas=replicas,
                segment_count=primary_count,
                settings=dict(settings),
            )
        _recompute_tuned(state)
        return {"acknowledged": True, "created": names}

    raise RequestError(f"unsupported API call {method} {path}")


def _shard_row(index: IndexState, shard_id: int, prirep: str, slot: ShardSlot) -> dict:
    row = {
        "index": index.index_name,
        "shard": shard_id,
        "prirep": prirep,
        "state": slot.status.value,
        "node": slot.pod if slot.status is ShardStatus.STARTED else None,
    }
    if index.no_valid_shard_copy and prirep == "p":
        row["unassigned.reason"] = "NO_VALID_SHARD_COPY"
    elif slot.status is not ShardStatus.STARTED:
        row["unassigned.reason"] = "NODE_LEFT"
    return row


def _index_health(index: IndexState) -> str:
    if index.no_valid_shard_copy or any(s.status is not ShardStatus.STARTED for s in index.primaries):
        return Health.RED.value
    if any(s.status is not ShardStatus.STARTED for s in index.replicas):
        return Health.YELLOW.value
    return Health.GREEN.value


# -- kubectl ----------------------------------------------------------------


def kubectl(state: ClusterState, args: str) -> str:
    words = args.split()
    if words[:2] == ["get", "pods"]:
        lines = ["NAME           READY  STATUS      NODE"]
        for pod_id in sorted(state.pods):
            pod = state.pods[pod_id]
            ready = "1/1" if pod.phase is PodPhase.RUNNING else "0/1"
            node = pod.host_binding or "<none>"
            lines.append(f"{pod_id:<14} {ready:<6} {pod.phase.value:<11} {node}")
        running = sum(1 for p in state.pods.values() if p.phase is PodPhase.RUNNING)
        pending = sum(1 for p in state.pods.values() if p.phase is PodPhase.PENDING)
        masters_ready = state.running_masters() if state.quorum else 0
        lines.append(
            f"# {running} Running / {pending} Pending; masters ready {masters_ready}/{state.master_count}"
        )
        return "\n".join(lines)

    if words[:2] == ["describe", "pod"]:
        if len(words) < 3 or words[2] not in state.pods:
            raise NotFoundError(f"pod not found: {words[2:] or '?'}")
        pod = state.pods[words[2]]
        lines = [
            f"Name:         {pod.pod_id}",
            f"Role:         {pod.role.value}",
            f"Status:       {pod.phase.value}",
            f"Node:         {pod.host_binding or pod.home_host}",
            "Events:",
        ]
        if pod.phase is PodPhase.PENDING:
            lines.append(
                f"  Warning  FailedScheduling  0/{len(state.hosts)} nodes are available: "
                f"node(s) had untolerated taint {{node.kubernetes.io/disk-pressure}} "
                f"(DiskPressure on {pod.home_host})"
            )
        else:
            lines.append("  <none>")
        return "\n".join(lines)

    if words[:2] == ["delete", "pod"]:
        if len(words) < 3 or words[2] not in state.pods:
            raise NotFoundError(f"pod not found: {words[2:] or '?'}")
        pod = state.pods[words[2]]
        pod.phase = PodPhase.TERMINATED
        pod.host_binding = None
        pod.restart_eligible_at_s = state.sim_time_s + 1
        return f'pod "{pod.pod_id}" deleted'

    if words[:2] == ["get", "events"]:
        if not state.k8s_events:
            return "No events found."
        return "\n".join(f"{t}s  {text}" for t, text in state.k8s_events[-50:])

    raise NotFoundError(f"kubectl emulation does not support {args!r}")
