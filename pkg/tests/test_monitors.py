import pytest

from guardian.monitors import (
    ALERT_CODES,
    Alert,
    RuleThresholds,
    Severity,
    dispatch,
    scan_es_rules,
    scan_hardware,
    scan_kubernetes,
)
from guardian.perfmodel import Baselines, ProbeBaseline, ScalingCoefficients
from guardian.sim.state import FaultKind, FaultSpec, PodPhase

THRESHOLDS = RuleThresholds()


class FakeScheduler:
    def __init__(self):
        self.preempted = []
        self.warnings = []

    def preempt(self, alerts):
        self.preempted.extend(alerts)

    def attach_warnings(self, alerts):
        self.warnings.extend(alerts)


class TestAlertType:
    def test_unknown_code_rejected(self):
        with pytest.raises(AssertionError):
            Alert(Severity.INFO, 0, "made_up_code", "x", "m", 0)

    def test_severity_ordering(self):
        assert Severity.INFO < Severity.WARNING < Severity.CRITICAL

    def test_thresholds_validate(self):
        with pytest.raises(ValueError):
            RuleThresholds(heap_warn_pct=95.0, heap_crit_pct=90.0)


class TestHardwareScan:
    def test_quiet_cluster_is_silent(self, small_cluster):
        assert scan_hardware(small_cluster.snapshot(), THRESHOLDS) == []

    def test_nic_and_dmesg_alerts(self, small_cluster):
        small_cluster.inject_fault(FaultSpec(
            at_s=1, kind=FaultKind.NIC_DEGRADATION,
            params={"hosts": "all", "retransmit_slope_per_s": 1.0, "bond_degrade_after_s": 2}))
        small_cluster.tick(130)
        alerts = scan_hardware(small_cluster.snapshot(), THRESHOLDS)
        codes = {a.code for a in alerts}
        assert "nic_degradation" in codes
        assert "dmesg_io_error" in codes  # watchdog timeout lines in the ring

    def test_nvme_alerts(self, small_cluster):
        snap = small_cluster.snapshot()
        snap.hosts["s797"].nvme.read_latency_us = 900.0
        snap.hosts["s811"].nvme.media_errors = 4
        codes = {(a.code, a.subject) for a in scan_hardware(snap, THRESHOLDS)}
        assert ("nvme_latency_high", "s797") in codes
        assert ("nvme_media_errors", "s811") in codes


class TestKubernetesScan:
    def test_pending_severity_scales(self, small_cluster):
        snap = small_cluster.snapshot()
        pods = sorted(snap.pods)
        snap.pods[pods[0]].phase = PodPhase.PENDING
        alerts = scan_kubernetes(snap, THRESHOLDS)
        assert [a.severity for a in alerts if a.code == "pods_pending"] == [Severity.WARNING]

        for pod_id in pods[:3]:
            snap.pods[pod_id].phase = PodPhase.PENDING
        alerts = scan_kubernetes(snap, THRESHOLDS)
        assert [a.severity for a in alerts if a.code == "pods_pending"] == [Severity.CRITICAL]

    def test_quorum_and_disk(self, small_cluster):
        snap = small_cluster.snapshot()
        snap.quorum = False
        snap.hosts["s812"].es_used_bytes = int(snap.hosts["s812"].mount_capacity_bytes * 0.82)
        codes = {a.code for a in scan_kubernetes(snap, THRESHOLDS)}
        assert {"quorum_lost", "disk_high"} <= codes

    def test_deterministic_for_same_snapshot(self, small_cluster):
        snap = small_cluster.snapshot()
        assert scan_kubernetes(snap, THRESHOLDS) == scan_kubernetes(snap, THRESHOLDS)


class TestEsRulesScan:
    def test_heap_thresholds(self, small_cluster):
        snap = small_cluster.snapshot()
        snap.pods["es-data-0"].heap_pct = 86.0
        snap.pods["es-data-1"].heap_pct = 91.0
        heap = {a.subject: a.severity for a in scan_es_rules(snap, THRESHOLDS)
                if a.code == "heap_pressure"}
        assert heap == {"es-data-0": Severity.WARNING, "es-data-1": Severity.CRITICAL}

    def test_health_alerts(self, small_cluster):
        from guardian.sim.state import Health

        snap = small_cluster.snapshot()
        snap.health = Health.RED
        assert any(a.code == "cluster_red" and a.severity is Severity.CRITICAL
                   for a in scan_es_rules(snap, THRESHOLDS))
        snap.health = Health.YELLOW
        assert any(a.code == "cluster_yellow" and a.severity is Severity.INFO
                   for a in scan_es_rules(snap, THRESHOLDS))

    def test_probe_deviation_requires_baselines(self, small_cluster):
        snap = small_cluster.snapshot()
        measured = {"query_term_status": 300.0}
        assert not any(a.code == "probe_deviation"
                       for a in scan_es_rules(snap, THRESHOLDS, None, measured))
        baselines = Baselines(
            probes={"query_term_status": ProbeBaseline(p50_ms=100.0, p95_ms=200.0)},
            coefficients=ScalingCoefficients(1.0, 1.0, 1.0),
            calibrated_at_s=0)
        alerts = scan_es_rules(snap, THRESHOLDS, baselines, measured)
        assert any(a.code == "probe_deviation" for a in alerts)
        # Exactly 2x baseline is not a deviation; the factor is strict.
        assert not any(a.code == "probe_deviation" for a in scan_es_rules(
            snap, THRESHOLDS, baselines, {"query_term_status": 200.0}))

    def test_log_error_rule(self, small_cluster):
        snap = small_cluster.snapshot()
        for i in range(6):
            snap.pods["es-master-0"].append_log(i, "ERROR", "boom")
        assert any(a.code == "es_log_errors" for a in scan_es_rules(snap, THRESHOLDS))


class TestDispatch:
    def test_critical_preempts_warning_attaches_info_logs(self):
        alerts = [
            Alert(Severity.CRITICAL, 0, "quorum_lost", "cluster", "m", 1),
            Alert(Severity.WARNING, 0, "disk_high", "s797", "m", 1),
            Alert(Severity.INFO, 1, "cluster_yellow", "cluster", "m", 1),
        ]
        scheduler = FakeScheduler()
        decision = dispatch(alerts, scheduler)
        assert decision.trigger_ai_loop
        assert scheduler.preempted == [alerts[0]]
        assert scheduler.warnings == [alerts[1]]
        assert decision.logged_info == [alerts[2]]

    def test_warnings_alone_do_not_trigger(self):
        alerts = [Alert(Severity.WARNING, 0, "disk_high", "s797", "m", 1)]
        scheduler = FakeScheduler()
        assert not dispatch(alerts, scheduler).trigger_ai_loop
        assert scheduler.preempted == []

    def test_code_set_is_closed(self):
        assert len(ALERT_CODES) == 15
        assert "disk_high" in ALERT_CODES
