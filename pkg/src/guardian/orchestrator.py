"""Lifecycle orchestrator: evaluate, deploy, calibrate, then the steady loop.

The steady loop runs three cadences off one simulated clock: rule scans
every 30 s, forecasting every 60 s, and the investigation loop every 300 s
or at the tick after a CRITICAL alert (preemption). All artifacts land in a
run directory; the run log is canonical JSON keyed solely on simulated
time, so two runs with the same scenario, seed and zero-noise flag are
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

from .actionloop import LoopBudget, ToolCall, ToolKit, run_loop
from .errors import ProbeUnavailableError
from .memory import DEFAULT_MIN_SIMILARITY, IncidentMemory, IncidentRecord, build_signature
from .metrics import MetricRegistry
from .monitors import Alert, RuleThresholds, Severity, dispatch, scan_es_rules, scan_hardware, scan_kubernetes
from .perfmodel import (
    QUERY_PROBES,
    Baselines,
    SlaTarget,
    calibrate,
    evaluate_sla,
    fit_table_anchors,
    optimize_config,
)
from .plans import RemediationPlan, plan_from_forecast
from .playbook import PlaybookInvestigator
from .predictor import (
    Series,
    forecast_disk_fill,
    forecast_heap,
    forecast_nvme_wear,
    log_escalation,
    nic_risk,
    pattern_predict,
)
from .sim.cluster import Cluster
from .sim.scenario import Scenario, load_scenario
from .sim.state import PodPhase, PodRole

SCAN_INTERVAL_S = 30
PREDICT_INTERVAL_S = 60
LOOP_INTERVAL_S = 300
TELEMETRY_WINDOW = 60  # samples per rolling series
LOG_WINDOW_S = 600

EXIT_OK = 0
EXIT_SLA_INFEASIBLE = 3


class Phase(IntEnum):
    EVALUATE = 0
    OPTIMIZE = 1
    DEPLOY = 2
    CALIBRATE = 3
    STABILIZE = 4
    ALERT = 5
    PREDICT = 6
    PLAN = 7
    HEAL = 8
    LEARN = 9
    UPGRADE = 10


@dataclass
class GuardianConfig:
    scenario: str = "builtin:steady"
    seed: int | None = None  # None = use the scenario's seed
    out_dir: str = "guardian-out"
    zero_noise: bool = False
    memory_path: str | None = None  # default: <out_dir>/incidents.jsonl
    min_similarity: float = DEFAULT_MIN_SIMILARITY
    sla: SlaTarget = field(default_factory=lambda: SlaTarget(
        query_p50_ms=120.0,
        write_p50_ms=50.0,
        availability_pct=99.9,
        expected_gb_per_shard=3.72,
        expected_shard_count=840,
    ))
    thresholds: RuleThresholds = field(default_factory=RuleThresholds)
    scan_interval_s: int = SCAN_INTERVAL_S
    predict_interval_s: int = PREDICT_INTERVAL_S
    loop_interval_s: int = LOOP_INTERVAL_S

    @classmethod
    def from_dict(cls, d: dict) -> "GuardianConfig":
        d = dict(d)
        if "sla" in d:
            d["sla"] = SlaTarget.from_dict(d["sla"])
        if "thresholds" in d:
            d["thresholds"] = RuleThresholds.from_dict(d["thresholds"])
        return cls(**d)


@dataclass
class Scheduler:
    """Decides when the investigation loop runs: every ``interval_s`` of
    simulated time, or at the tick after a CRITICAL alert arrives."""

    interval_s: int = LOOP_INTERVAL_S
    next_scheduled_s: int = LOOP_INTERVAL_S
    preempt_at_s: int | None = None
    pending_critical: list[Alert] = field(default_factory=list)
    pending_warnings: list[Alert] = field(default_factory=list)

    def preempt(self, alerts: list[Alert]) -> None:
        self.pending_critical.extend(alerts)
        if self.preempt_at_s is None:
            self.preempt_at_s = alerts[0].at_s + 1 if alerts else None

    def attach_warnings(self, alerts: list[Alert]) -> None:
        self.pending_warnings.extend(alerts)

    def due(self, t_s: int) -> bool:
        if self.preempt_at_s is not None and t_s >= self.preempt_at_s:
            return True
        return t_s >= self.next_scheduled_s

    def take_triggers(self) -> list[Alert]:
        triggers = self.pending_critical + self.pending_warnings
        self.pending_critical = []
        self.pending_warnings = []
        return triggers

    def completed(self, t_s: int) -> None:
        self.preempt_at_s = None
        self.next_scheduled_s = t_s + self.interval_s


@dataclass
class RunResult:
    exit_code: int
    out_dir: Path
    summary: dict


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


class GuardianRun:
    """One full lifecycle over one scenario. Create, then call :meth:`run`."""

    def __init__(self, config: GuardianConfig):
        self.config = config
        self.scenario: Scenario = load_scenario(config.scenario)
        self.seed = config.seed if config.seed is not None else self.scenario.seed
        self.out_dir = Path(config.out_dir)
        self.memory_path = Path(config.memory_path) if config.memory_path \
            else self.out_dir / "incidents.jsonl"
        self.registry = MetricRegistry()
        self.scheduler = Scheduler(interval_s=config.loop_interval_s,
                                   next_scheduled_s=config.loop_interval_s)
        self.cluster: Cluster | None = None
        self.baselines: Baselines | None = None
        self.memory: IncidentMemory | None = None
        self.toolkit: ToolKit | None = None
        # rolling telemetry: series name -> list[(t_s, value)]
        self._telemetry: dict[str, list[tuple[int, float]]] = {}
        self._active_forecasts: dict[tuple[str, str], object] = {}
        self._measured_p50: dict[str, float] = {}
        self._plans_run: set[str] = set()
        self._replayed_records: set[str] = set()
        self._precursor_signature = None  # last signature seen with no CRITICALs pending
        self._current_alerts: list[Alert] = []
        self._loop_runs = 0
        self._files: dict[str, object] = {}

    # -- artifact plumbing ---------------------------------------------------

    def _open_files(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / "reports").mkdir(exist_ok=True)
        for name in ("run-log.jsonl", "alerts.jsonl", "forecasts.jsonl"):
            self._files[name] = (self.out_dir / name).open("w")
        telemetry = (self.out_dir / "telemetry.csv").open("w")
        telemetry.write("at_s,series,value\n")
        self._files["telemetry.csv"] = telemetry

    def _close_files(self) -> None:
        for fh in self._files.values():
            fh.close()
        self._files = {}

    def _log(self, payload: dict) -> None:
        self._files["run-log.jsonl"].write(_canonical(payload) + "\n")

    def _log_events(self, events) -> None:
        for event in events:
            self._log({"type": "event", **event.to_dict()})

    # -- lifecycle -----------------------------------------------------------

    def run(self) -> RunResult:
        self._open_files()
        try:
            return self._run_inner()
        finally:
            self._close_files()

    def _run_inner(self) -> RunResult:
        cfg = self.config
        self.registry.set("guardian_phase", Phase.EVALUATE)

        # Evaluate: go/no-go against the latency scaling model.
        coeffs = fit_table_anchors()
        sla_report = evaluate_sla(cfg.sla, coeffs)
        (self.out_dir / "feasibility.json").write_text(
            json.dumps(sla_report.to_dict(), indent=2, sort_keys=True) + "\n")
        if not sla_report.feasible:
            self._log({"type": "halt", "at_s": 0, "reason": "sla_infeasible",
                       "report": sla_report.to_dict()})
            return RunResult(EXIT_SLA_INFEASIBLE, self.out_dir,
                             {"halted": "sla_infeasible", **sla_report.to_dict()})

        self.registry.set("guardian_phase", Phase.OPTIMIZE)
        recommendation = optimize_config("mixed")

        self.registry.set("guardian_phase", Phase.DEPLOY)
        self.cluster = Cluster.from_spec(self.scenario.cluster_spec, seed=self.seed,
                                         zero_noise=cfg.zero_noise)
        self.toolkit = ToolKit(self.cluster)
        self.memory = IncidentMemory(self.memory_path)
        self.cluster.exec_es_api("PUT", "/_all/_settings",
                                 {"settings": recommendation.index_settings})
        self._log_events(self.cluster.drain_events())
        for fault in self.scenario.faults:
            self.cluster.inject_fault(fault)
        self._log_events(self.cluster.drain_events())

        self.registry.set("guardian_phase", Phase.CALIBRATE)
        self.baselines = calibrate(self.cluster)
        self.baselines.save(self.out_dir / "baselines.json")

        self.registry.set("guardian_phase", Phase.STABILIZE)
        self._log({"type": "lifecycle", "at_s": self.cluster.state.sim_time_s,
                   "phase": "steady_state_entered"})

        while self.cluster.state.sim_time_s < self.scenario.duration_s:
            self._log_events(self.cluster.tick(1))
            t = self.cluster.state.sim_time_s
            if t % cfg.scan_interval_s == 0:
                self._scan(t)
            if t % cfg.predict_interval_s == 0:
                self._predict(t)
            if self.scheduler.due(t):
                self._heal(t)

        self.registry.set_health(self.cluster.health().value)
        self.registry.write(self.out_dir / "metrics.prom")
        summary = {
            "scenario": self.scenario.name,
            "seed": self.seed,
            "duration_s": self.cluster.state.sim_time_s,
            "final_health": self.cluster.health().value,
            "loop_runs": self._loop_runs,
            "incidents": len(self.memory.records),
            "state_hash": self.cluster.state_hash(),
        }
        (self.out_dir / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n")
        return RunResult(EXIT_OK, self.out_dir, summary)

    # -- cadences ------------------------------------------------------------

    def _sample(self, name: str, t: int, value: float) -> None:
        series = self._telemetry.setdefault(name, [])
        series.append((t, value))
        if len(series) > TELEMETRY_WINDOW:
            del series[: len(series) - TELEMETRY_WINDOW]
        self._files["telemetry.csv"].write(f"{t},{name},{round(value, 6)}\n")

    def _scan(self, t: int) -> None:
        self.registry.set("guardian_phase", Phase.ALERT)
        snapshot = self.cluster.snapshot()
        for host_id in sorted(snapshot.hosts):
            host = snapshot.hosts[host_id]
            self._sample(f"disk/{host_id}", t, host.disk_pct * 100)
            self._sample(f"retransmit/{host_id}", t, host.nic.retransmit_rate)
            self._sample(f"wear/{host_id}", t, host.nvme.wear_level_pct)
            self.registry.set("guardian_node_disk_pct", round(host.disk_pct * 100, 6), host=host_id)
        for pod_id in sorted(snapshot.pods):
            pod = snapshot.pods[pod_id]
            if pod.role is PodRole.DATA:
                self._sample(f"heap/{pod_id}", t, pod.heap_pct)
            self.registry.set("guardian_node_heap_pct", round(pod.heap_pct, 6), pod=pod_id)

        alerts = (scan_hardware(snapshot, self.config.thresholds)
                  + scan_kubernetes(snapshot, self.config.thresholds)
                  + scan_es_rules(snapshot, self.config.thresholds,
                                  self.baselines, self._measured_p50))
        for alert in alerts:
            self._files["alerts.jsonl"].write(_canonical(alert.to_dict()) + "\n")
            self.registry.inc("guardian_alerts_total", severity=alert.severity.name)
        self.registry.set_health(snapshot.health.value)
        dispatch(alerts, self.scheduler)
        self._current_alerts = alerts

    def _predict(self, t: int) -> None:
        self.registry.set("guardian_phase", Phase.PREDICT)
        snapshot = self.cluster.snapshot()
        forecasts = []
        threshold_pct = snapshot.eviction_threshold * 100

        for name, series_points in sorted(self._telemetry.items()):
            if len(series_points) < 2:
                continue
            kind, _, subject = name.partition("/")
            series = Series.of(series_points)
            if kind == "disk":
                fc = forecast_disk_fill(series, threshold_pct, subject=subject)
                if fc.eta_hours is not None:
                    self.registry.set("guardian_pred_disk_fill_hours",
                                      round(fc.eta_hours, 6), host=subject)
            elif kind == "heap":
                fc = forecast_heap(series, self.config.thresholds.heap_crit_pct, subject=subject)
                if fc.eta_hours is not None:
                    self.registry.set("guardian_pred_heap_hours", round(fc.eta_hours, 6), pod=subject)
            elif kind == "wear":
                fc = forecast_nvme_wear(series, subject=subject)
                if fc.eta_hours is not None:
                    self.registry.set("guardian_pred_nvme_wear_months",
                                      round(fc.eta_hours, 6), host=subject)
            elif kind == "retransmit":
                degraded = snapshot.hosts[subject].nic.bond_degraded
                fc = nic_risk(series, bond_degraded=degraded, subject=subject)
                self.registry.set("guardian_pred_nic_risk", round(fc.risk, 6), host=subject)
            else:
                continue
            forecasts.append(fc)

        log_window = [
            (float(ts), level)
            for pod in snapshot.pods.values() if pod.phase is PodPhase.RUNNING
            for ts, level, _ in pod.log_ring if t - ts <= LOG_WINDOW_S
        ]
        if log_window:
            forecasts.append(log_escalation(sorted(log_window)))

        for fc in forecasts:
            self._files["forecasts.jsonl"].write(_canonical(fc.to_dict()) + "\n")
            self._active_forecasts[(fc.model, fc.subject)] = fc

        if snapshot.health.value != "red":
            for probe in QUERY_PROBES:
                try:
                    latency = self.cluster.run_probe(probe)
                except ProbeUnavailableError:
                    break
                self._measured_p50[f"query_{probe}"] = latency
                self._files["telemetry.csv"].write(f"{t},probe/{probe},{round(latency, 6)}\n")
                self.registry.set("guardian_probe_latency_ms", round(latency, 6), probe=probe)
            self._log_events(self.cluster.drain_events())

        self.registry.set("guardian_phase", Phase.PLAN)
        for fc in forecasts:
            plan = plan_from_forecast(fc)
            if plan is not None:
                key = f"{plan.scenario}:{fc.subject}"
                if key not in self._plans_run:
                    self._plans_run.add(key)
                    self._execute_plan(t, plan)

        slopes = self._signature_slopes()
        signature = build_signature(self._current_alerts,
                                    self._active_forecasts.values(), slopes)
        if not self.scheduler.pending_critical:
            self._precursor_signature = signature
        for match in pattern_predict(signature, self.memory,
                                     min_similarity=self.config.min_similarity):
            if match.record.incident_id in self._replayed_records or not match.staged_actions:
                continue
            self._replayed_records.add(match.record.incident_id)
            plan = RemediationPlan(
                scenario="disk_pressure", trigger=f"memory match {match.record.incident_id} "
                f"(similarity {match.similarity:.2f})", source="memory_match")
            self._log({"type": "memory_match", "at_s": t,
                       "incident_id": match.record.incident_id,
                       "similarity": round(match.similarity, 6),
                       "staged_actions": len(match.staged_actions)})
            self._execute_staged(t, plan, match.staged_actions)

    def _signature_slopes(self) -> dict[str, float]:
        from .predictor import fit_trend

        slopes: dict[str, float] = {}
        best_disk = 0.0
        best_retrans = 0.0
        best_heap = 0.0
        for name, points in self._telemetry.items():
            if len(points) < 2:
                continue
            slope = fit_trend(Series.of(points)).slope_per_h
            kind = name.split("/", 1)[0]
            if kind == "disk":
                best_disk = max(best_disk, slope)
            elif kind == "retransmit":
                best_retrans = max(best_retrans, slope)
            elif kind == "heap":
                best_heap = max(best_heap, slope)
        if best_disk > 0:
            slopes["disk_pct_per_h"] = round(best_disk, 6)
        if best_retrans > 0:
            slopes["retransmit_per_h"] = round(best_retrans, 6)
        if best_heap > 0:
            slopes["heap_pct_per_h"] = round(best_heap, 6)
        return slopes

    def _execute_plan(self, t: int, plan: RemediationPlan) -> None:
        staged = tuple(a.to_dict() for a in plan.actions)
        self._execute_staged(t, plan, staged)

    def _execute_staged(self, t: int, plan: RemediationPlan, staged) -> None:
        from .safety import validate_command

        outcomes = []
        for action in staged:
            call = ToolCall(action["tool"], action["args"], tuple(action.get("tags", ())))
            verdict = validate_command(call.tool, call.args)
            if not verdict:
                outcomes.append({"call": call.to_dict(), "verdict": f"denied: {verdict.reason}"})
                self._log({"type": "plan_aborted", "at_s": t, "scenario": plan.scenario,
                           "reason": verdict.reason})
                self.scheduler.preempt([Alert(Severity.CRITICAL, 2, "plan_denied", "planner",
                                              f"staged plan denied: {verdict.reason}", t)])
                break
            output = self.toolkit.execute(call)
            self.registry.inc("guardian_remediations_total")
            outcomes.append({"call": call.to_dict(), "verdict": "allowed",
                             "output_bytes": len(output.encode())})
        self._log_events(self.toolkit.drain_events())
        self._log({"type": "plan_executed", "at_s": t, "scenario": plan.scenario,
                   "source": plan.source, "trigger": plan.trigger, "actions": outcomes})

    def _heal(self, t: int) -> None:
        self.registry.set("guardian_phase", Phase.HEAL)
        triggers = self.scheduler.take_triggers()
        health_before = self.cluster.health().value
        investigator = PlaybookInvestigator(
            triggers, hosts=list(self.cluster.state.hosts),
            eviction_threshold_pct=self.cluster.state.eviction_threshold * 100)
        report = run_loop(investigator, self.toolkit, triggers, LoopBudget())
        self._log_events(self.toolkit.drain_events())
        self._loop_runs += 1

        report_path = self.out_dir / "reports" / f"report_{self._loop_runs:04d}.json"
        report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        self._log({"type": "loop_completed", "at_s": self.cluster.state.sim_time_s,
                   "trigger_count": len(triggers), "outcome": report.outcome,
                   "totals": report.totals})
        executed = sum(1 for a in report.actions if a.get("executed"))
        self.registry.inc("guardian_ai_loop_runs_total")
        self.registry.inc("guardian_ai_loop_tokens_total", report.totals["tokens"])
        self.registry.set("guardian_ai_loop_iterations", report.totals["iterations"])
        self.registry.set("guardian_ai_loop_duration_seconds", report.totals["duration_s"])
        self.registry.inc("guardian_remediations_total", executed)

        # Learn: persist the incident so the next run can act on the precursor.
        if report.outcome != "no_anomaly":
            self.registry.set("guardian_phase", Phase.LEARN)
            signature = build_signature(triggers, self._active_forecasts.values(),
                                        self._signature_slopes())
            # Prefer the precursor-time signature when it overlaps the trigger:
            # future runs should recognize the early-warning shape, not the
            # fully-developed outage shape.
            precursor = self._precursor_signature
            if precursor is not None and precursor.categorical & signature.categorical:
                signature = precursor
            actions = [
                {"tool": a["call"]["tool"], "args": a["call"]["args"],
                 "tags": a["call"].get("tags", []), "verdict": a["verdict"]}
                for a in report.actions
                if a.get("executed") and a["call"].get("tags")
            ]
            record = IncidentRecord(
                incident_id="",
                opened_at_s=min((a.at_s for a in triggers), default=t),
                closed_at_s=self.cluster.state.sim_time_s,
                signature=signature,
                causal_chain=report.causal_chain,
                actions=actions,
                outcome=report.outcome,
                health_transitions=[health_before, report.final_health],
            )
            self.memory.append(record)
            self.registry.inc("guardian_incidents_total")

        self.scheduler.completed(self.cluster.state.sim_time_s)
        self.registry.set("guardian_phase", Phase.STABILIZE)

    # -- maintenance ---------------------------------------------------------

    def rolling_upgrade(self, target_version: str, settle_timeout_s: int = 120) -> dict:
        """Upgrade pods one at a time, masters first, waiting for GREEN
        between pods. Pauses with a CRITICAL alert if the cluster does not
        settle. Recalibrates baselines afterwards."""
        self.registry.set("guardian_phase", Phase.UPGRADE)
        state = self.cluster.state
        if state.es_version == target_version:
            return {"upgraded": [], "skipped": "already at target version"}

        order = sorted(p for p, pod in state.pods.items() if pod.role is PodRole.MASTER)
        order += sorted(p for p, pod in state.pods.items() if pod.role is PodRole.DATA)
        upgraded = []
        for pod_id in order:
            self.cluster.exec_kubectl(f"delete pod {pod_id}")
            settled = False
            for _ in range(settle_timeout_s):
                self._log_events(self.cluster.tick(1))
                pod = state.pods[pod_id]
                if pod.phase is PodPhase.RUNNING and self.cluster.health().value == "green":
                    settled = True
                    break
            if not settled:
                alert = Alert(Severity.CRITICAL, 0, "pods_pending", pod_id,
                              "rolling upgrade paused: cluster did not settle",
                              state.sim_time_s)
                self.scheduler.preempt([alert])
                self._log({"type": "upgrade_paused", "at_s": state.sim_time_s, "pod": pod_id})
                return {"upgraded": upgraded, "paused_at": pod_id}
            upgraded.append(pod_id)
        state.es_version = target_version
        self.baselines = calibrate(self.cluster)
        self.baselines.save(self.out_dir / "baselines.json")
        self._log({"type": "upgrade_complete", "at_s": state.sim_time_s,
                   "version": target_version})
        return {"upgraded": upgraded, "version": target_version}


def run_lifecycle(config: GuardianConfig) -> RunResult:
    return GuardianRun(config).run()
