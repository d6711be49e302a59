"""Stopping-distance check for the zone thresholds.

A rover commanded at constant speed drives straight ahead from the map's
start pose (by default down a straight corridor into its end wall) through
the full runtime loop: sampling, channel latency, zone caps and the latch.
The start is moved back over one sampling period of travel so the worst
sampling phase is covered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..sim.scenario import Scenario
from ..sim.telemetry import TelemetryLog
from . import world
from .runtime import RoverSetup, run_rover
from .safety import SafetyZones

DEFAULT_WALL_DISTANCE = 24.0


@dataclass
class ZoneCheck:
    speed: float
    zones: SafetyZones
    clearance: list = field(default_factory=list)  # closest front body clearance, per phase
    collisions: list = field(default_factory=list)
    zone_entry: dict = field(default_factory=dict)  # zone -> first entry time (s), phase 0
    log: TelemetryLog | None = None  # phase-0 run

    @property
    def worst(self) -> float:
        return float(min(self.clearance))

    @property
    def safe(self) -> bool:
        return not any(self.collisions) and self.worst > 0

    def line(self, tag: str) -> str:
        entries = " ".join(f"{z}@{t:.1f}s" for z, t in sorted(self.zone_entry.items()))
        return (f"{tag} v={self.speed:g} m/s clearance={self.worst:.3f} m collisions={sum(self.collisions)} "
                f"entries=[{entries}] {'PASSED' if self.safe else 'FAILED'}")


def straight_course(distance: float = DEFAULT_WALL_DISTANCE) -> world.CorridorMap:
    return world.corridor_from_centerline([[0.0, 0.0], [distance, 0.0]])


def drive_straight(course: world.CorridorMap, speed: float, zones: SafetyZones, setback: float = 0.0,
                   duration: float | None = None, seed: int = 0):
    """(closest front body clearance, collided, log) for one constant-speed run."""
    x, y, h = course.start
    course = replace(course, start=(x - setback * math.cos(h), y - setback * math.sin(h), h))
    setup = RoverSetup(course, lambda obs: np.array([speed, 0.0]), zones, goal_enabled=False)
    if duration is None:
        duration = round(course.length / max(speed, 0.1) + 8.0, 1)
    sc = Scenario.from_dict({"schema_version": 1, "plant": "rover", "duration": duration, "seed": seed})
    log = run_rover(sc, setup)
    front = min(r.extra["d_front"] for r in log.records) - zones.footprint
    hit = log.meta["collisions"] > 0
    if hit:  # the ray may already be past the wall
        front = min(front, log.meta["min_clearance"])
    return float(front), hit, log


def zone_entries(log: TelemetryLog) -> dict:
    out = {}
    for r in log.records:
        z = r.index_or_zone
        if z != "Z0" and z not in out:
            out[z] = r.time
    return out


def check_speed(speed: float, zones: SafetyZones, course: world.CorridorMap | None = None,
                phases: int = 21) -> ZoneCheck:
    course = course or straight_course()
    c = ZoneCheck(speed, zones)
    for k, off in enumerate(np.linspace(0.0, speed * 0.1, phases, endpoint=False)):
        clear, hit, log = drive_straight(course, speed, zones, float(off))
        c.clearance.append(clear)
        c.collisions.append(hit)
        if k == 0:
            c.log = log
            c.zone_entry = zone_entries(log)
    return c


def validate_zones(zones: SafetyZones | None = None, speeds=(3.0,), phases: int = 21,
                   course: world.CorridorMap | None = None) -> list:
    zones = zones or SafetyZones()
    return [check_speed(v, zones, course, phases) for v in speeds]
