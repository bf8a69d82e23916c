"""Command-line interface.

Exit codes: 0 success, 1 failure (including replay mismatch), 3 when the
SLA evaluation gate declares the deployment infeasible.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click

from .errors import GuardianError
from .orchestrator import EXIT_SLA_INFEASIBLE, GuardianConfig, run_lifecycle
from .perfmodel import SlaTarget, calibrate, evaluate_sla, fit_table_anchors
from .reporting import render_report
from .sim.cluster import Cluster
from .sim.scenario import list_builtin, load_scenario


def _load_config(config_path: str | None, **overrides) -> GuardianConfig:
    data = json.loads(Path(config_path).read_text()) if config_path else {}
    config = GuardianConfig.from_dict(data)
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    return config


@click.group()
def main() -> None:
    """Autonomous operations engine for a simulated search cluster."""


@main.command()
@click.option("--query-p50-ms", type=float, default=120.0, show_default=True)
@click.option("--write-p50-ms", type=float, default=50.0, show_default=True)
@click.option("--availability-pct", type=float, default=99.9, show_default=True)
@click.option("--gb-per-shard", type=float, default=3.72, show_default=True)
@click.option("--shard-count", type=float, default=840, show_default=True)
def evaluate(query_p50_ms, write_p50_ms, availability_pct, gb_per_shard, shard_count):
    """Feasibility gate: can the latency targets be met at this scale?

    Exits 3 when infeasible so deploy pipelines can branch on it.
    """
    target = SlaTarget(
        query_p50_ms=query_p50_ms,
        write_p50_ms=write_p50_ms,
        availability_pct=availability_pct,
        expected_gb_per_shard=gb_per_shard,
        expected_shard_count=shard_count,
    )
    report = evaluate_sla(target, fit_table_anchors())
    click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if not report.feasible:
        sys.exit(EXIT_SLA_INFEASIBLE)


@main.command("calibrate")
@click.option("--scenario", default="builtin:steady", show_default=True)
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--zero-noise", is_flag=True, help="Disable latency measurement noise.")
@click.option("--out", type=click.Path(), default="baselines.json", show_default=True)
def calibrate_cmd(scenario, seed, zero_noise, out):
    """Measure per-probe latency baselines against a green cluster."""
    sc = load_scenario(scenario)
    cluster = Cluster.from_spec(sc.cluster_spec, seed=seed if seed is not None else sc.seed,
                                zero_noise=zero_noise)
    baselines = calibrate(cluster)
    baselines.save(out)
    click.echo(f"wrote {out} ({len(baselines.probes)} probe baselines)")


@main.command()
@click.option("--scenario", default=None, help="Scenario path or builtin:<name>.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON config file.")
@click.option("--out", type=click.Path(), default=None, envvar="GUARDIAN_OUT_DIR",
              help="Run directory [env: GUARDIAN_OUT_DIR].")
@click.option("--memory", "memory_path", type=click.Path(), default=None,
              help="Incident memory file shared across runs.")
@click.option("--zero-noise", is_flag=True, default=None)
def run(scenario, seed, config_path, out, memory_path, zero_noise):
    """Run the full lifecycle over a scenario and write all artifacts."""
    config = _load_config(config_path, scenario=scenario, seed=seed, out_dir=out,
                          memory_path=memory_path, zero_noise=zero_noise or None)
    result = run_lifecycle(config)
    click.echo(json.dumps(result.summary, indent=2, sort_keys=True))
    sys.exit(result.exit_code)


@main.command()
@click.option("--scenario", default="builtin:steady", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default="replay-out", show_default=True,
              envvar="GUARDIAN_OUT_DIR")
def replay(scenario, seed, config_path, out):
    """Run the same scenario twice from scratch and verify the run logs are
    byte-identical. Exits 1 on divergence."""
    out = Path(out)
    digests = []
    for leg in ("a", "b"):
        config = _load_config(config_path, scenario=scenario, seed=seed,
                              out_dir=str(out / f"replay-{leg}"),
                              memory_path=str(out / f"replay-{leg}" / "incidents.jsonl"))
        result = run_lifecycle(config)
        if result.exit_code != 0:
            click.echo(f"replay leg {leg} exited {result.exit_code}", err=True)
            sys.exit(result.exit_code)
        log = (out / f"replay-{leg}" / "run-log.jsonl").read_bytes()
        digests.append(hashlib.sha256(log).hexdigest())
        click.echo(f"leg {leg}: sha256 {digests[-1]}")
    if digests[0] != digests[1]:
        click.echo("MISMATCH: replay diverged", err=True)
        sys.exit(1)
    click.echo("replay verified: run logs byte-identical")


@main.command()
@click.option("--run-dir", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None,
              help="Where to write the report bundle (default: the run dir).")
def report(run_dir, out):
    """Render report.txt, alerts.csv and PNG figures from a run directory."""
    written = render_report(run_dir, out)
    for path in written:
        click.echo(str(path))


@main.command()
@click.option("--run-dir", type=click.Path(exists=True), required=True)
def metrics(run_dir):
    """Print the run's metric exposition to stdout."""
    path = Path(run_dir) / "metrics.prom"
    if not path.exists():
        click.echo("no metrics.prom in run dir", err=True)
        sys.exit(1)
    click.echo(path.read_text(), nl=False)


@main.command()
def scenarios():
    """List built-in scenarios."""
    for name in list_builtin():
        click.echo(f"builtin:{name}")


def entrypoint() -> None:  # pragma: no cover - thin wrapper
    try:
        main()
    except GuardianError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    entrypoint()
