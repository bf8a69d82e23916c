"""Prometheus-style metric registry with text exposition to file or stdout.

The metric name set is closed: dashboards and alerts key on these exact
names, so adding or renaming requires a deliberate registry change. Cluster
status encodes GREEN=2, YELLOW=1, RED=0 (higher is healthier). Counters are
monotone by construction.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

HEALTH_VALUES = {"green": 2.0, "yellow": 1.0, "red": 0.0}

# name -> (type, help text)
METRICS: dict[str, tuple[str, str]] = {
    "guardian_cluster_status": ("gauge", "Cluster health: 2=green 1=yellow 0=red"),
    "guardian_alerts_total": ("counter", "Alerts raised, by severity"),
    "guardian_ai_loop_runs_total": ("counter", "Investigation loop runs completed"),
    "guardian_ai_loop_iterations": ("gauge", "Iterations used by the last loop run"),
    "guardian_ai_loop_tokens_total": ("counter", "Tokens consumed across all loop runs"),
    "guardian_ai_loop_duration_seconds": ("gauge", "Simulated duration of the last loop run"),
    "guardian_node_heap_pct": ("gauge", "JVM heap usage percent, by pod"),
    "guardian_node_disk_pct": ("gauge", "Data mount usage percent, by host"),
    "guardian_pred_disk_fill_hours": ("gauge", "Forecast hours until disk threshold, by host"),
    "guardian_pred_heap_hours": ("gauge", "Forecast hours until heap critical, by pod"),
    "guardian_pred_nvme_wear_months": ("gauge", "Forecast months until NVMe wear threshold, by host"),
    "guardian_pred_nic_risk": ("gauge", "NIC failure risk score, by host"),
    "guardian_probe_latency_ms": ("gauge", "Last measured probe latency, by probe"),
    "guardian_incidents_total": ("counter", "Incidents recorded to memory"),
    "guardian_remediations_total": ("counter", "Remediation actions executed"),
    "guardian_phase": ("gauge", "Current lifecycle phase ordinal"),
}


def _render_labels(labels: dict[str, str]) -> str:
    if not labels:
        return ""
    inner = ",".join(f'{k}="{v}"' for k, v in sorted(labels.items()))
    return "{" + inner + "}"


def _format_value(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(round(value, 6))


@dataclass
class MetricRegistry:
    _values: dict[tuple[str, tuple], float] = field(default_factory=dict)

    def set(self, name: str, value: float, **labels: str) -> None:
        kind, _ = self._lookup(name)
        self._values[(name, tuple(sorted(labels.items())))] = float(value)

    def inc(self, name: str, amount: float = 1.0, **labels: str) -> None:
        kind, _ = self._lookup(name)
        if kind != "counter":
            raise ValueError(f"{name} is a {kind}; inc() is for counters")
        if amount < 0:
            raise ValueError("counters only move forward")
        key = (name, tuple(sorted(labels.items())))
        self._values[key] = self._values.get(key, 0.0) + float(amount)

    def get(self, name: str, **labels: str) -> float:
        self._lookup(name)
        return self._values.get((name, tuple(sorted(labels.items()))), 0.0)

    def set_health(self, health_value: str) -> None:
        self.set("guardian_cluster_status", HEALTH_VALUES[health_value])

    @staticmethod
    def _lookup(name: str) -> tuple[str, str]:
        if name not in METRICS:
            raise KeyError(f"unregistered metric {name!r}")
        return METRICS[name]

    def render(self) -> str:
        """Deterministic text exposition; every registered metric appears even
        when unset so scrapers see a stable shape."""
        lines: list[str] = []
        for name in METRICS:
            kind, help_text = METRICS[name]
            lines.append(f"# HELP {name} {help_text}")
            lines.append(f"# TYPE {name} {kind}")
            series = sorted(
                (labels, value) for (n, labels), value in self._values.items() if n == name
            )
            if not series:
                lines.append(f"{name} 0")
            for labels, value in series:
                lines.append(f"{name}{_render_labels(dict(labels))} {_format_value(value)}")
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path | None = None) -> None:
        text = self.render()
        if path is None:
            sys.stdout.write(text)
        else:
            Path(path).write_text(text)
