"""LiDAR bins, safety zones with speed caps, the stop latch and the eta attack."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..simplex import Zone
from .plant import RoverCommand

MAX_RANGE = 100.0
FOOTPRINT = 0.35  # m, rover radius
# sensor-frame azimuths (counter-clockwise positive) of the three bins
LIDAR_ANGLES = np.array([math.pi / 4, 0.0, -math.pi / 4])
BIN_HALF_WIDTH = math.radians(5.0)
HEIGHT_LIMIT = 0.5


@dataclass(frozen=True)
class LidarDistances:
    d_left45: float
    d_front: float
    d_right45: float

    def as_array(self) -> np.ndarray:
        return np.array([self.d_left45, self.d_front, self.d_right45])

    @classmethod
    def from_array(cls, a) -> "LidarDistances":
        return cls(float(a[0]), float(a[1]), float(a[2]))


def preprocess_pointcloud(points, height_limit: float = HEIGHT_LIMIT, bins=LIDAR_ANGLES,
                          half_width: float = BIN_HALF_WIDTH, max_range: float = MAX_RANGE) -> LidarDistances:
    """Bin a point cloud (rows x, y, z, azimuth) into three planar distances.

    Points above ``height_limit`` are dropped; each bin reports the minimum
    planar range of the points whose azimuth lies within ``half_width`` of
    the bin centre, or ``max_range`` when empty.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 4)
    pts = pts[pts[:, 2] <= height_limit]
    rng = np.hypot(pts[:, 0], pts[:, 1])
    out = []
    for c in bins:
        d = np.abs((pts[:, 3] - c + math.pi) % (2 * math.pi) - math.pi)
        sel = rng[d <= half_width]
        out.append(float(min(sel.min(), max_range)) if sel.size else float(max_range))
    return LidarDistances(*out)


@dataclass(frozen=True)
class SafetyZones:
    """Body-clearance thresholds (m) per zone, front and lateral."""

    front: tuple = (3.0, 1.9, 0.6)
    lateral: tuple = (0.4, 0.3, 0.2)
    caps: tuple = (1.5, 1.0, 0.0)
    footprint: float = FOOTPRINT

    def __post_init__(self):
        for name in ("front", "lateral"):
            t = getattr(self, name)
            if len(t) != 3 or not (t[0] > t[1] > t[2] > 0):
                raise ValueError(f"{name} thresholds must be strictly decreasing and > 0")
        if not (self.caps[0] >= self.caps[1] >= self.caps[2] >= 0):
            raise ValueError("caps must be non-increasing")

    def scaled(self, factor: float) -> "SafetyZones":
        return SafetyZones(tuple(v * factor for v in self.front), tuple(v * factor for v in self.lateral),
                           self.caps, self.footprint)

    def cap(self, zone: Zone) -> float | None:
        return None if zone == Zone.Z0 else self.caps[int(zone) - 1]

    @classmethod
    def from_dict(cls, d: dict | None) -> "SafetyZones":
        d = d or {}
        base = cls()
        return cls(tuple(d.get("front", base.front)), tuple(d.get("lateral", base.lateral)),
                   tuple(d.get("caps", base.caps)), float(d.get("footprint", base.footprint)))


def clearances(d: LidarDistances, footprint: float = FOOTPRINT):
    """(front, lateral) body clearance; lateral is the nearer diagonal."""
    return d.d_front - footprint, min(d.d_left45, d.d_right45) - footprint


def zone_classify(d: LidarDistances, zones: SafetyZones) -> Zone:
    """Most restrictive zone whose front or lateral condition holds."""
    front, lateral = clearances(d, zones.footprint)
    for k in (2, 1, 0):
        if front < zones.front[k] or lateral < zones.lateral[k]:
            return Zone(k + 1)
    return Zone.Z0


@dataclass
class StopLatch:
    engaged: bool = False
    engaged_at: int | None = None  # us

    def engage(self, now: int) -> None:
        if not self.engaged:
            self.engaged = True
            self.engaged_at = now

    def acknowledge(self) -> None:
        self.engaged = False
        self.engaged_at = None


def safe_limit(cmd: RoverCommand, zone: Zone, latch: StopLatch, zones: SafetyZones | None = None,
               now: int = 0) -> RoverCommand:
    zones = zones or SafetyZones()
    if zone == Zone.Z3:
        latch.engage(now)
    if latch.engaged:
        return RoverCommand(0.0, 0.0)
    cap = zones.cap(zone)
    if cap is None:
        return cmd
    return RoverCommand(min(max(cmd.v, -cap), cap), cmd.omega)


@dataclass(frozen=True)
class AttackConfig:
    eta: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be > 0")


def apply_attack(u: RoverCommand, a: AttackConfig) -> RoverCommand:
    return RoverCommand(u.v * a.eta, u.omega * a.eta)


def goal_detected(x: float, y: float, heading: float, m, detect_range: float = 2.0,
                  fov: float = math.radians(30.0)) -> bool:
    """Marker within range, inside the camera cone, facing us and unoccluded."""
    from .geometry import raycast_segments

    gx, gy, facing = m.goal
    dx, dy = gx - x, gy - y
    dist = math.hypot(dx, dy)
    if dist > detect_range:
        return False
    if dist < 1e-9:
        return True
    bearing = (math.atan2(dy, dx) - heading + math.pi) % (2 * math.pi) - math.pi
    if abs(bearing) > fov:
        return False
    if math.cos(facing) * -dx + math.sin(facing) * -dy <= 0:
        return False  # looking at the back of the marker
    r = raycast_segments(x, y, heading, np.array([bearing]), m.segments, dist + 1.0)[0]
    return r >= dist - 1e-9
