import json

import pytest

from guardian.monitors import Alert, Severity
from guardian.orchestrator import (
    EXIT_SLA_INFEASIBLE,
    GuardianConfig,
    GuardianRun,
    Phase,
    Scheduler,
    run_lifecycle,
)
from guardian.perfmodel import SlaTarget
from guardian.sim.state import PodPhase


def config(tmp_path, scenario="builtin:steady", **kwargs):
    return GuardianConfig(scenario=scenario, out_dir=str(tmp_path / "out"), **kwargs)


class TestScheduler:
    def test_critical_preempts_next_tick(self):
        scheduler = Scheduler(interval_s=300, next_scheduled_s=300)
        alert = Alert(Severity.CRITICAL, 0, "quorum_lost", "cluster", "m", 47)
        scheduler.preempt([alert])
        assert not scheduler.due(47)  # not the same tick
        assert scheduler.due(48)  # the very next tick, not t=300

    def test_scheduled_cadence(self):
        scheduler = Scheduler(interval_s=300, next_scheduled_s=300)
        assert not scheduler.due(299)
        assert scheduler.due(300)
        scheduler.completed(304)
        assert not scheduler.due(603)
        assert scheduler.due(604)

    def test_completed_clears_preemption_and_triggers(self):
        scheduler = Scheduler()
        scheduler.preempt([Alert(Severity.CRITICAL, 0, "quorum_lost", "cluster", "m", 10)])
        scheduler.attach_warnings([Alert(Severity.WARNING, 0, "disk_high", "s797", "m", 10)])
        assert len(scheduler.take_triggers()) == 2
        scheduler.completed(20)
        assert scheduler.take_triggers() == []
        assert not scheduler.due(21)


class TestLifecycle:
    def test_steady_run_artifacts(self, tmp_path):
        result = run_lifecycle(config(tmp_path))
        assert result.exit_code == 0
        assert result.summary["final_health"] == "green"
        assert result.summary["incidents"] == 0
        for name in ("run-log.jsonl", "alerts.jsonl", "forecasts.jsonl",
                     "telemetry.csv", "baselines.json", "metrics.prom",
                     "summary.json", "feasibility.json"):
            assert (result.out_dir / name).exists(), name

    def test_infeasible_sla_halts_with_exit_3(self, tmp_path):
        sla = SlaTarget(query_p50_ms=5.0, write_p50_ms=50.0, availability_pct=99.9,
                        expected_gb_per_shard=3.72, expected_shard_count=840)
        result = run_lifecycle(config(tmp_path, sla=sla))
        assert result.exit_code == EXIT_SLA_INFEASIBLE
        feasibility = json.loads((result.out_dir / "feasibility.json").read_text())
        assert not feasibility["feasible"]
        # Halted before deployment: no cluster artifacts beyond the gate.
        assert not (result.out_dir / "baselines.json").exists()

    def test_run_log_is_sim_time_only(self, tmp_path):
        result = run_lifecycle(config(tmp_path))
        for line in (result.out_dir / "run-log.jsonl").read_text().splitlines():
            entry = json.loads(line)
            assert "at_s" in entry
            assert not any("wall" in k or "timestamp" in k for k in entry)

    def test_outage_run_resolves(self, tmp_path):
        result = run_lifecycle(config(tmp_path, scenario="builtin:incident1_outage"))
        assert result.exit_code == 0
        assert result.summary["final_health"] == "green"
        assert result.summary["incidents"] >= 1
        reports = sorted((result.out_dir / "reports").glob("report_*.json"))
        final = json.loads(reports[-1].read_text())
        assert final["outcome"] == "resolved"

    def test_phase_enum_has_eleven_phases(self):
        assert len(Phase) == 11
        assert Phase.EVALUATE < Phase.CALIBRATE < Phase.HEAL < Phase.UPGRADE


class TestRollingUpgrade:
    @pytest.fixture
    def finished_run(self, tmp_path):
        run = GuardianRun(config(tmp_path))
        result = run.run()
        assert result.exit_code == 0
        return run

    def test_upgrade_is_rolling_and_recalibrates(self, finished_run):
        run = finished_run
        cluster = run.cluster
        old_calibrated_at = run.baselines.calibrated_at_s
        max_down = 0
        original_tick = cluster.tick

        def counting_tick(dt):
            nonlocal max_down
            events = original_tick(dt)
            down = sum(1 for p in cluster.state.pods.values()
                       if p.phase is not PodPhase.RUNNING)
            max_down = max(max_down, down)
            return events

        cluster.tick = counting_tick
        run._open_files()
        try:
            outcome = run.rolling_upgrade("8.18.0")
        finally:
            run._close_files()
        assert outcome["version"] == "8.18.0"
        assert len(outcome["upgraded"]) == 15
        assert max_down <= 1
        assert cluster.health().value == "green"
        assert run.baselines.calibrated_at_s > old_calibrated_at

    def test_upgrade_same_version_is_noop(self, finished_run):
        outcome = finished_run.rolling_upgrade("8.17.0")
        assert outcome["upgraded"] == []
        assert "skipped" in outcome
