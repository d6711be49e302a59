"""Corridor maps: walls, obstacles, start pose, goal marker and centerline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..sim.rng import seeded_rng
from . import geometry

CORRIDOR_WIDTH = 2.0
MARKER_OFFSET = 0.01  # marker sits this far in front of its wall


@dataclass(frozen=True)
class CorridorMap:
    walls: np.ndarray  # (M, 4)
    start: tuple  # (x, y, heading)
    goal: tuple  # (x, y, facing) of the marker
    centerline: np.ndarray  # (K, 2) polyline from start to goal
    obstacles: tuple = ()
    length: float = 0.0
    _segs: np.ndarray = field(default=None, repr=False, compare=False)
    _cum: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        walls = np.ascontiguousarray(self.walls, dtype=float).reshape(-1, 4)
        object.__setattr__(self, "walls", walls)
        cl = np.asarray(self.centerline, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "centerline", cl)
        obs = tuple(np.asarray(o, dtype=float).reshape(-1, 2) for o in self.obstacles)
        object.__setattr__(self, "obstacles", obs)
        parts = [walls] + [geometry.polygon_segments(o) for o in obs]
        object.__setattr__(self, "_segs", np.ascontiguousarray(np.vstack(parts)))
        seg_len = np.linalg.norm(np.diff(cl, axis=0), axis=1)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seg_len)]))
        if not self.length:
            object.__setattr__(self, "length", float(self._cum[-1]))

    @property
    def segments(self) -> np.ndarray:
        return self._segs

    def with_obstacle(self, poly) -> "CorridorMap":
        return replace(self, obstacles=self.obstacles + (np.asarray(poly, dtype=float),))

    def progress(self, x: float, y: float) -> float:
        """Arc length of the closest centerline point."""
        cl = self.centerline
        a, b = cl[:-1], cl[1:]
        s = b - a
        L2 = np.maximum((s**2).sum(axis=1), 1e-300)
        t = np.clip(((np.array([x, y]) - a) * s).sum(axis=1) / L2, 0.0, 1.0)
        p = a + t[:, None] * s
        d = ((p - np.array([x, y])) ** 2).sum(axis=1)
        i = int(np.argmin(d))
        return float(self._cum[i] + t[i] * np.sqrt(L2[i]))


def corridor_from_centerline(points, width: float = CORRIDOR_WIDTH, bay: tuple | None = None) -> CorridorMap:
    """Axis-aligned corridor around a polyline with right-angle turns.

    The rover starts 1 m after the start cap; the goal marker hangs on the
    end cap facing back down the corridor.  ``bay = (depth, bay_width)``
    widens the last ``depth`` metres symmetrically, leaving room to turn
    on the spot at the goal.
    """
    P = np.asarray(points, dtype=float)
    h = 0.5 * width
    dirs = np.diff(P, axis=0)
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    normals = np.column_stack([-dirs[:, 1], dirs[:, 0]])  # left of travel
    # extend the polyline by h past both ends so caps close the corridor
    ext = P.copy()
    ext[0] -= dirs[0] * h
    ext[-1] += dirs[-1] * h
    left, right = [], []
    for i in range(len(P)):
        if i == 0:
            n = normals[0]
        elif i == len(P) - 1:
            n = normals[-1]
        else:
            n = normals[i - 1] + normals[i]
        left.append(ext[i] + h * n)
        right.append(ext[i] - h * n)
    if bay is not None:
        depth, bay_w = float(bay[0]), float(bay[1])
        if not (0 < depth < np.linalg.norm(P[-1] - P[-2]) and bay_w > width):
            raise ValueError("bay must be shorter than the last leg and wider than the corridor")
        grow = 0.5 * (bay_w - width) * normals[-1]
        back = dirs[-1] * depth
        for side, sgn in ((left, 1.0), (right, -1.0)):
            end = side.pop()
            side += [end - back, end - back + sgn * grow, end + sgn * grow]
    walls = []
    for side in (left, right):
        for a, b in zip(side[:-1], side[1:]):
            walls.append([a[0], a[1], b[0], b[1]])
    walls.append([left[0][0], left[0][1], right[0][0], right[0][1]])
    walls.append([left[-1][0], left[-1][1], right[-1][0], right[-1][1]])
    start_xy = P[0] + dirs[0] * (1.0 - h)
    heading = float(np.arctan2(dirs[0, 1], dirs[0, 0]))
    end = ext[-1] - dirs[-1] * MARKER_OFFSET
    facing = float(np.arctan2(-dirs[-1, 1], -dirs[-1, 0]))
    cl = np.vstack([start_xy, P[1:]])
    return CorridorMap(np.array(walls), (float(start_xy[0]), float(start_xy[1]), heading),
                       (float(end[0]), float(end[1]), facing), cl)


def pinned_centerline() -> np.ndarray:
    """About 20 m: 8 m straight, right turn, 6 m, left turn, 6 m."""
    return np.array([[0.0, 0.0], [8.0, 0.0], [8.0, -6.0], [14.0, -6.0]])


PINNED_BAY = (3.0, 4.0)


def pinned_course() -> CorridorMap:
    return corridor_from_centerline(pinned_centerline(), bay=PINNED_BAY)


def generate_course(seed: int, max_length: float = 20.0, width: float = CORRIDOR_WIDTH,
                    min_first_leg: float = 5.0, min_leg: float = 3.0) -> CorridorMap:
    """Random zig-zag corridor; turns alternate direction so legs never overlap.

    The route drawn covers the centerline from the start pose to the goal
    and stays within ``max_length``.
    """
    if max_length <= 0:
        raise ValueError("max_length must be > 0")
    rng = seeded_rng(seed, "course")
    budget = max_length - (1.0 - 0.5 * width)  # the start pose is 1 m past the start cap
    n_turns = int(rng.integers(0, 3))
    if budget < min_first_leg + n_turns * min_leg:
        n_turns = 0
    first = rng.uniform(min_first_leg, max(min_first_leg, budget - n_turns * min_leg))
    first = min(first, budget)
    legs = [first]
    remaining = budget - first
    for k in range(n_turns):
        left_turns = n_turns - k - 1
        hi = remaining - left_turns * min_leg
        if hi < min_leg:
            break
        legs.append(rng.uniform(min_leg, hi))
        remaining -= legs[-1]
    heading = 0.0
    sign = 1.0 if rng.random() < 0.5 else -1.0
    pts = [np.zeros(2)]
    for i, L in enumerate(legs):
        if i > 0:
            heading += sign * np.pi / 2
            sign = -sign
        pts.append(pts[-1] + L * np.array([np.cos(heading), np.sin(heading)]))
    pts = np.round(np.array(pts), 9)
    return corridor_from_centerline(pts, width)


# --- map files --------------------------------------------------------------

def save_map(path, m: CorridorMap) -> None:
    lines = ["# dualsimplex corridor map", "schema_version 1", "units m", f"length {m.length!r}",
             "start " + " ".join(repr(float(v)) for v in m.start),
             "goal " + " ".join(repr(float(v)) for v in m.goal)]
    lines += ["wall " + " ".join(repr(float(v)) for v in w) for w in m.walls]
    lines += ["obstacle " + " ".join(repr(float(v)) for v in o.ravel()) for o in m.obstacles]
    lines.append("centerline " + " ".join(repr(float(v)) for v in m.centerline.ravel()))
    Path(path).write_text("\n".join(lines) + "\n")


def load_map(path) -> CorridorMap:
    walls, obstacles = [], []
    start = goal = centerline = None
    length = 0.0
    version = None
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *vals = line.split()
        if key == "schema_version":
            version = int(vals[0])
        elif key == "units":
            if vals[0] != "m":
                raise ValueError(f"unsupported units {vals[0]!r}")
        elif key == "length":
            length = float(vals[0])
        elif key == "start":
            start = tuple(map(float, vals))
        elif key == "goal":
            goal = tuple(map(float, vals))
        elif key == "wall":
            walls.append(list(map(float, vals)))
        elif key == "obstacle":
            obstacles.append(np.array(list(map(float, vals))).reshape(-1, 2))
        elif key == "centerline":
            centerline = np.array(list(map(float, vals))).reshape(-1, 2)
        else:
            raise ValueError(f"{path}: unknown map record {key!r}")
    if version != 1 or start is None or goal is None or centerline is None or not walls:
        raise ValueError(f"{path}: incomplete map file")
    return CorridorMap(np.array(walls), start, goal, centerline, tuple(obstacles), length)


def collision_check(x: float, y: float, m: CorridorMap, footprint: float = 0.35) -> bool:
    """Footprint disc touches a wall or obstacle (tangency counts)."""
    return geometry.min_distance(x, y, m.segments) <= footprint
