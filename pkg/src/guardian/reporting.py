"""Render a run directory into a human report, CSV extracts and figures.

Consumes the artifacts a lifecycle run leaves behind (run-log.jsonl,
alerts.jsonl, telemetry.csv, summary.json, reports/) and produces:

* ``report.txt``   — plain-text run summary
* ``alerts.csv``   — delimited alert export
* ``figures/*.png``— disk usage and probe latency over simulated time
"""

from __future__ import annotations

import csv
import json
from collections import Counter, defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def _read_telemetry(path: Path) -> dict[str, list[tuple[int, float]]]:
    series: dict[str, list[tuple[int, float]]] = defaultdict(list)
    if not path.exists():
        return series
    with path.open() as fh:
        for row in csv.DictReader(fh):
            series[row["series"]].append((int(row["at_s"]), float(row["value"])))
    return series


def write_alerts_csv(run_dir: Path, out_path: Path) -> int:
    alerts = _read_jsonl(run_dir / "alerts.jsonl")
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["at_s", "severity", "layer", "code", "subject", "message"])
        for a in alerts:
            writer.writerow([a["at_s"], a["severity"], a["layer"], a["code"],
                             a["subject"], a["message"]])
    return len(alerts)


def _plot_series(series: dict[str, list[tuple[int, float]]], prefix: str,
                 title: str, ylabel: str, out_path: Path,
                 hline: float | None = None, hline_label: str = "") -> bool:
    selected = {name: pts for name, pts in sorted(series.items())
                if name.startswith(prefix) and pts}
    if not selected:
        return False
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for name, pts in selected.items():
        ts, vs = zip(*pts)
        ax.plot(ts, vs, label=name.split("/", 1)[1])
    if hline is not None:
        ax.axhline(hline, linestyle="--", linewidth=1, color="red", label=hline_label)
    ax.set_xlabel("simulated time (s)")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return True


def render_report(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Build the report bundle; returns the list of files written."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir else run_dir
    figures_dir = out_dir / "figures"
    out_dir.mkdir(parents=True, exist_ok=True)
    figures_dir.mkdir(exist_ok=True)
    written: list[Path] = []

    summary = {}
    summary_path = run_dir / "summary.json"
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())

    alerts_csv = out_dir / "alerts.csv"
    alert_count = write_alerts_csv(run_dir, alerts_csv)
    written.append(alerts_csv)

    telemetry = _read_telemetry(run_dir / "telemetry.csv")
    disk_png = figures_dir / "disk_usage.png"
    if _plot_series(telemetry, "disk/", "Data mount usage by host", "disk used (%)",
                    disk_png, hline=85.0, hline_label="eviction threshold"):
        written.append(disk_png)
    probe_png = figures_dir / "probe_latency.png"
    if _plot_series(telemetry, "probe/", "Query probe latency", "p50 latency (ms)", probe_png):
        written.append(probe_png)

    alerts = _read_jsonl(run_dir / "alerts.jsonl")
    by_code = Counter(a["code"] for a in alerts)
    by_severity = Counter(a["severity"] for a in alerts)
    events = _read_jsonl(run_dir / "run-log.jsonl")
    loop_lines = [e for e in events if e.get("type") == "loop_completed"]
    incident_reports = sorted((run_dir / "reports").glob("report_*.json")) \
        if (run_dir / "reports").exists() else []

    lines = ["RUN REPORT", "=" * 60]
    if summary:
        lines += [
            f"scenario:      {summary.get('scenario', '?')}",
            f"seed:          {summary.get('seed', '?')}",
            f"duration:      {summary.get('duration_s', '?')} s (simulated)",
            f"final health:  {summary.get('final_health', '?')}",
            f"loop runs:     {summary.get('loop_runs', 0)}",
            f"incidents:     {summary.get('incidents', 0)}",
        ]
    lines += ["", f"alerts: {alert_count} total"]
    for severity in ("CRITICAL", "WARNING", "INFO"):
        if by_severity.get(severity):
            lines.append(f"  {severity:<9} {by_severity[severity]}")
    for code, count in by_code.most_common():
        lines.append(f"    {code:<22} {count}")
    lines.append("")
    for entry in loop_lines:
        totals = entry.get("totals", {})
        lines.append(
            f"loop at t={entry['at_s']}s: outcome={entry['outcome']} "
            f"iterations={totals.get('iterations')} tokens={totals.get('tokens')}"
        )
    for path in incident_reports:
        body = json.loads(path.read_text())
        lines.append("")
        lines.append(f"--- {path.name}: {body.get('outcome')} ---")
        for step in body.get("causal_chain", []):
            lines.append(f"  * {step}")
        if body.get("flags"):
            lines.append(f"  flags: {', '.join(body['flags'])}")

    report_path = out_dir / "report.txt"
    report_path.write_text("\n".join(lines) + "\n")
    written.insert(0, report_path)
    return written
