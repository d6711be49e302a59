"""Run reports and runtime invariant checks, computed from a telemetry log alone."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .sim.telemetry import TelemetryLog
from .simplex import Mode

HP = Mode.HIGH_PERFORMANCE.value
SAFE = Mode.SAFE_RECOVER.value
STOP = Mode.SAFETY_STOP.value


@dataclass
class RunReport:
    scenario_hash: str
    seed: int
    plant: str
    records: int
    collisions: int
    safety_stops: int
    mode_switches: int
    deadline_misses: int
    min_clearance: float | None
    goal_reached: bool | None
    switches: list = field(default_factory=list)  # (time_s, from, to, cause)
    zone_timeline: list = field(default_factory=list)  # (start_s, zone)
    violations: list = field(default_factory=list)
    telemetry: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _finite(v):
    return None if v is None or not math.isfinite(v) else float(v)


def check_mode_soundness(log: TelemetryLog) -> list:
    pol = log.meta.get("policy", {})
    exit_t = pol.get("exit_threshold", 1.0)
    max_age = pol.get("max_hp_age_us", 4000)
    out = []
    for r in log.records:
        if r.mode != HP:
            continue
        idx, age = r.index_or_zone, r.freshness_age
        if isinstance(idx, (int, float)):
            if not idx < exit_t:
                out.append(f"t={r.time}: HighPerformance with index {idx} >= {exit_t}")
            if age is None or age > max_age:
                out.append(f"t={r.time}: HighPerformance with stale port (age {age})")
        elif idx == "Z3":
            out.append(f"t={r.time}: HighPerformance in Z3")
    return out


def check_hysteresis(log: TelemetryLog) -> list:
    enter = log.meta.get("policy", {}).get("enter_threshold", 0.1)
    return [f"t={t['time_s']}: re-entered HighPerformance at index {t.get('index')}"
            for t in log.transitions
            if t["from"] == SAFE and t["to"] == HP and not (t.get("index") is not None and t["index"] < enter)]


def check_ack_latching(log: TelemetryLog) -> list:
    """After each stop, applied commands stay zero until an operator_ack event."""
    stops = [t["time_s"] for t in log.transitions if t["to"] == STOP]
    acks = sorted(e["time_s"] for e in log.events if e["type"] == "operator_ack")
    out = []
    for ts in stops:
        release = next((a for a in acks if a >= ts), math.inf)
        for r in log.records:
            if ts <= r.time < release and any(v != 0 for v in r.applied_output):
                out.append(f"t={r.time}: non-zero actuation {r.applied_output} before acknowledgment")
    return out


def check_actuation_present(log: TelemetryLog) -> list:
    return [f"t={r.time}: no applied actuation" for r in log.records
            if not r.applied_output or any(v is None or not math.isfinite(v) for v in r.applied_output)]


def check_invariants(log: TelemetryLog) -> list:
    out = check_mode_soundness(log) + check_hysteresis(log) + check_actuation_present(log)
    if log.plant == "rover":
        out += check_ack_latching(log)
        if log.meta.get("collisions", 0):
            out.append(f"collision: {log.meta['collisions']} plant steps in contact")
    return out


def zone_timeline(log: TelemetryLog) -> list:
    out = []
    for r in log.records:
        if isinstance(r.index_or_zone, str) and (not out or out[-1][1] != r.index_or_zone):
            out.append([r.time, r.index_or_zone])
    return out


def build_report(log: TelemetryLog, telemetry: dict | None = None) -> RunReport:
    m = log.meta
    return RunReport(
        scenario_hash=m.get("scenario", ""),
        seed=int(m.get("seed", 0)),
        plant=log.plant,
        records=len(log.records),
        collisions=int(m.get("collisions", 0)),
        safety_stops=sum(t["to"] == STOP for t in log.transitions),
        mode_switches=len(log.transitions),
        deadline_misses=int(m.get("deadline_misses", 0)),
        min_clearance=_finite(m.get("min_clearance")),
        goal_reached=m.get("goal_reached"),
        switches=[[t["time_s"], t["from"], t["to"], t["cause"]] for t in log.transitions],
        zone_timeline=zone_timeline(log),
        violations=check_invariants(log),
        telemetry=dict(telemetry or {}),
    )
