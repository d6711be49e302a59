"""Scenario execution: plant dispatch, run directories and report files."""

from __future__ import annotations

from pathlib import Path

from .report import RunReport, build_report
from .sim.scenario import Scenario
from .sim.telemetry import TelemetryLog, read_jsonl


def run_scenario(sc: Scenario) -> TelemetryLog:
    if sc.plant == "pendulum":
        from .pendulum.runtime import run_pendulum

        return run_pendulum(sc)
    from .rover.runtime import run_rover

    return run_rover(sc)


def run_dir(sc: Scenario, root) -> Path:
    return Path(root) / f"{sc.digest()[:12]}-{sc.seed}"


def write_run(log: TelemetryLog, out: Path) -> RunReport:
    out.mkdir(parents=True, exist_ok=True)
    log.write(out / "telemetry")
    report = build_report(log, {"csv": "telemetry.csv", "jsonl": "telemetry.jsonl"})
    (out / "report.json").write_text(report.to_json())
    return report


def execute(sc: Scenario, root) -> tuple:
    """Run ``sc`` and write telemetry plus report.json; returns (report, run dir)."""
    out = run_dir(sc, root)
    return write_run(run_scenario(sc), out), out


def report_from_telemetry(jsonl_path) -> RunReport:
    return build_report(read_jsonl(jsonl_path), {"csv": "telemetry.csv", "jsonl": "telemetry.jsonl"})
