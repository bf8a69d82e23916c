import pytest

from guardian.errors import (
    ConfigurationError,
    ProbeUnavailableError,
    RequestError,
    TargetError,
    UnsupportedCommandError,
)
from guardian.perfmodel import UNTUNED_LATENCY_MULTIPLIER
from guardian.sim.cluster import Cluster, derive_health
from guardian.sim.state import (
    ClusterSpec,
    FaultKind,
    FaultSpec,
    Health,
    HostSpec,
    PodPhase,
    ShardStatus,
)


def independent_health(state):
    """Re-derivation of the health rule, written separately from the engine."""
    masters = sum(1 for p in state.pods.values()
                  if p.role.value == "master" and p.phase.value == "Running")
    if masters < state.master_count // 2 + 1:
        return "red"
    statuses_p = [s.status.value for ix in state.indices.values() for s in ix.primaries]
    if any(ix.no_valid_shard_copy for ix in state.indices.values()):
        return "red"
    if any(s != "STARTED" for s in statuses_p):
        return "red"
    statuses_r = [s.status.value for ix in state.indices.values() for s in ix.replicas]
    if any(s != "STARTED" for s in statuses_r):
        return "yellow"
    return "green"


class TestBuild:
    def test_default_shape(self, default_cluster):
        state = default_cluster.state
        assert len(state.pods) == 15
        assert len(state.indices) == 168
        assert state.primary_shard_count() == 840
        assert sum(len(ix.replicas) for ix in state.indices.values()) == 840
        assert state.health is Health.GREEN
        assert state.gb_per_shard() == pytest.approx(3.72)

    def test_invalid_spec_rejected(self):
        with pytest.raises(ConfigurationError):
            ClusterSpec(index_count=0).validate()
        with pytest.raises(ConfigurationError):
            ClusterSpec(data_layout=(1, 2, 3)).validate()  # sums to 6, not 12
        with pytest.raises(ConfigurationError):
            Cluster.from_spec(ClusterSpec(hosts=(HostSpec("h1", 1.0, 5.0),)))

    def test_data_layout_respected(self):
        spec = ClusterSpec(data_layout=(4, 5, 3))
        cluster = Cluster.from_spec(spec)
        per_host = {}
        for pod in cluster.state.pods.values():
            if pod.role.value == "data":
                per_host[pod.home_host] = per_host.get(pod.home_host, 0) + 1
        assert per_host == {"s797": 4, "s811": 5, "s812": 3}


class TestDeterminism:
    def test_same_seed_same_hash(self, outage_scenario):
        def run():
            c = Cluster.from_spec(outage_scenario.cluster_spec, seed=7, zero_noise=True)
            for f in outage_scenario.faults:
                c.inject_fault(f)
            c.tick(400)
            return c.state_hash()

        assert run() == run()

    def test_tick_rejects_nonpositive(self, small_cluster):
        with pytest.raises(ConfigurationError):
            small_cluster.tick(0)


class TestFaultsAndEviction:
    def _pressure(self, cluster, host="s797", total_gb=400.0):
        cluster.inject_fault(FaultSpec(
            at_s=1, kind=FaultKind.FOREIGN_DATA_GROWTH,
            params={"host": host, "total_gb": total_gb, "rate_gb_per_s": 40.0}))

    def test_eviction_and_recovery_cycle(self, small_cluster):
        self._pressure(small_cluster)
        small_cluster.tick(30)
        state = small_cluster.state
        host = state.hosts["s797"]
        assert host.disk_pct >= state.eviction_threshold
        evicted = [p for p in state.pods.values() if p.phase is PodPhase.PENDING]
        assert evicted and all(p.host_binding is None for p in evicted)
        assert state.health is Health.RED  # primaries lost on the evicted pods

        small_cluster.exec_host_command("s797", "rm -rf /mnt/cassandra-disk1")
        small_cluster.tick(5)
        assert all(p.phase is PodPhase.RUNNING for p in state.pods.values())
        assert state.health is Health.GREEN

    def test_health_passes_through_yellow_on_recovery(self, small_cluster):
        self._pressure(small_cluster)
        small_cluster.tick(30)
        small_cluster.exec_host_command("s797", "rm -rf /mnt/cassandra-disk1")
        seen = [e.detail for e in small_cluster.tick(5) if e.kind == "health_changed"]
        assert "red -> yellow" in seen
        assert "yellow -> green" in seen

    def test_independent_health_checker_agrees(self, small_cluster):
        self._pressure(small_cluster)
        for _ in range(40):
            small_cluster.tick(1)
            assert small_cluster.state.health.value == independent_health(small_cluster.state)

    def test_shard_conservation_without_index_ops(self, small_cluster):
        expected = small_cluster.state.primary_shard_count()
        self._pressure(small_cluster)
        small_cluster.tick(30)
        small_cluster.exec_host_command("s797", "rm -rf /mnt/cassandra-disk1")
        small_cluster.tick(10)
        assert small_cluster.state.primary_shard_count() == expected

    def test_node_kill_and_restart(self, small_cluster):
        small_cluster.inject_fault(FaultSpec(
            at_s=1, kind=FaultKind.NODE_KILL, params={"pod": "es-data-0", "down_s": 10}))
        small_cluster.tick(5)
        assert small_cluster.state.pods["es-data-0"].phase is PodPhase.TERMINATED
        small_cluster.tick(20)
        assert small_cluster.state.pods["es-data-0"].phase is PodPhase.RUNNING

    def test_heap_leak(self, small_cluster):
        start = small_cluster.state.pods["es-data-1"].heap_pct
        small_cluster.inject_fault(FaultSpec(
            at_s=1, kind=FaultKind.HEAP_LEAK, params={"pod": "es-data-1", "pct_per_h": 3600.0}))
        small_cluster.tick(10)
        assert small_cluster.state.pods["es-data-1"].heap_pct == pytest.approx(start + 10.0)

    def test_shard_copy_corruption(self, small_cluster):
        small_cluster.inject_fault(FaultSpec(
            at_s=1, kind=FaultKind.SHARD_COPY_CORRUPTION, params={"index_count": 3}))
        small_cluster.tick(2)
        state = small_cluster.state
        assert state.health is Health.RED
        corrupted = [ix for ix in state.indices.values() if ix.no_valid_shard_copy]
        assert len(corrupted) == 3
        # Delete-and-recreate is the only way out.
        names = sorted(ix.index_name for ix in corrupted)
        small_cluster.exec_es_api("DELETE", "/" + ",".join(names))
        small_cluster.exec_es_api("PUT", "/" + ",".join(names))
        small_cluster.tick(5)
        assert state.health is Health.GREEN

    def test_unknown_fault_target(self, small_cluster):
        with pytest.raises(TargetError):
            small_cluster.inject_fault(FaultSpec(
                at_s=0, kind=FaultKind.FOREIGN_DATA_GROWTH,
                params={"host": "nope", "total_gb": 1}))

    def test_nic_fault_degrades_bond(self, small_cluster):
        small_cluster.inject_fault(FaultSpec(
            at_s=1, kind=FaultKind.NIC_DEGRADATION,
            params={"hosts": "all", "retransmit_slope_per_s": 0.1, "bond_degrade_after_s": 5}))
        small_cluster.tick(10)
        for host in small_cluster.state.hosts.values():
            assert host.nic.bond_degraded
            assert host.nic.retransmit_rate > 0
        counts = [h.nic.error_count for h in small_cluster.state.hosts.values()]
        small_cluster.tick(5)
        assert all(h.nic.error_count >= c
                   for h, c in zip(small_cluster.state.hosts.values(), counts))


class TestProbes:
    def test_probe_refused_when_red(self, small_cluster):
        small_cluster.inject_fault(FaultSpec(
            at_s=1, kind=FaultKind.SHARD_COPY_CORRUPTION, params={"index_count": 1}))
        small_cluster.tick(2)
        with pytest.raises(ProbeUnavailableError):
            small_cluster.run_probe("term_status")

    def test_zero_noise_probes_are_reproducible(self, default_cluster):
        a = default_cluster.run_probe("term_status")
        b = default_cluster.run_probe("term_status")
        assert a == b
        assert 89.0 <= a <= 111.0

    def test_untuned_cluster_is_slower(self):
        tuned = Cluster.from_spec(ClusterSpec(), zero_noise=True)
        untuned = Cluster.from_spec(ClusterSpec(tuned=False), zero_noise=True)
        ratio = untuned.run_probe("match_all") / tuned.run_probe("match_all")
        assert ratio == pytest.approx(UNTUNED_LATENCY_MULTIPLIER)

    def test_unknown_probe(self, small_cluster):
        with pytest.raises(ConfigurationError):
            small_cluster.run_probe("fuzzy")


class TestEmulatedSurfaces:
    def test_df_and_du_shapes(self, small_cluster):
        df = small_cluster.exec_host_command("s797", "df -h /mnt")
        assert "Use%" in df and "/mnt/es-data" in df
        du = small_cluster.exec_host_command("s797", "du -sh /mnt/*")
        assert "/mnt/es-data" in du

    def test_rm_es_mount_refused(self, small_cluster):
        with pytest.raises(UnsupportedCommandError):
            small_cluster.exec_host_command("s797", "rm -rf /mnt/es-data")

    def test_smart_and_bond_output(self, small_cluster):
        smart = small_cluster.exec_host_command("s811", "smart")
        assert "Percentage Used" in smart
        bond = small_cluster.exec_host_command("s811", "ethtool bond0")
        assert "Bond Status: healthy" in bond

    def test_cluster_health_endpoint(self, small_cluster):
        body = small_cluster.exec_es_api("GET", "/_cluster/health")
        assert body["status"] == "green"
        assert body["number_of_nodes"] == len(small_cluster.state.pods)
        assert body["unassigned_shards"] == 0

    def test_cat_shards_reports_reason(self, small_cluster):
        small_cluster.inject_fault(FaultSpec(
            at_s=1, kind=FaultKind.SHARD_COPY_CORRUPTION, params={"index_count": 1}))
        small_cluster.tick(2)
        rows = small_cluster.exec_es_api("GET", "/_cat/shards")
        reasons = {r.get("unassigned.reason") for r in rows}
        assert "NO_VALID_SHARD_COPY" in reasons

    def test_wildcard_delete_rejected(self, small_cluster):
        for path in ("/_all", "/idx-*", "/"):
            with pytest.raises(RequestError):
                small_cluster.exec_es_api("DELETE", path)

    def test_settings_update_flips_tuned(self, small_cluster):
        assert small_cluster.state.tuned
        small_cluster.exec_es_api("PUT", "/idx-000/_settings",
                                  {"settings": {"refresh_interval": "1s"}})
        assert not small_cluster.state.tuned
        small_cluster.exec_es_api("PUT", "/idx-000/_settings",
                                  {"settings": {"refresh_interval": "30s"}})
        assert small_cluster.state.tuned

    def test_kubectl_masters_ready_zero_without_quorum(self, small_cluster):
        state = small_cluster.state
        for pod in state.pods.values():
            if pod.role.value == "master" and pod.pod_id != "es-master-0":
                pod.phase = PodPhase.TERMINATED
                pod.restart_eligible_at_s = 10**9
        small_cluster.tick(1)
        assert not state.quorum
        listing = small_cluster.exec_kubectl("get pods")
        assert "masters ready 0/3" in listing

    def test_kubectl_delete_pod(self, small_cluster):
        out = small_cluster.exec_kubectl("delete pod es-data-2")
        assert "deleted" in out
        assert small_cluster.state.pods["es-data-2"].phase is PodPhase.TERMINATED

    def test_pod_logs(self, small_cluster):
        small_cluster.tick(60)
        logs = small_cluster.exec_pod_command("es-data-0", "logs")
        assert "health ping ok" in logs

    def test_derive_health_pure(self, small_cluster):
        snap = small_cluster.snapshot()
        assert derive_health(snap) is Health.GREEN
        snap.indices["idx-000"].primaries[0].status = ShardStatus.UNASSIGNED
        assert derive_health(snap) is Health.RED
        assert small_cluster.health() is Health.GREEN  # snapshot was a copy
