"""Unicycle rover with first-order actuator lag."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RoverState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    v_actual: float = 0.0
    omega_actual: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading, self.v_actual, self.omega_actual])

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.heading, self.v_actual, self.omega_actual)):
            raise ValueError("non-finite rover state")


@dataclass(frozen=True)
class RoverCommand:
    v: float = 0.0
    omega: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega])


@dataclass(frozen=True)
class DriveParams:
    tau_v: float = 0.4  # s
    tau_omega: float = 0.2  # s
    v_max: float = 3.0  # m/s, physical limit
    omega_max: float = 3.0  # rad/s
    substep: float = 0.01  # s

    def __post_init__(self):
        if not (self.tau_v > 0 and self.tau_omega > 0 and self.v_max > 0 and self.omega_max > 0 and self.substep > 0):
            raise ValueError("drive parameters must be positive")

    @classmethod
    def from_dict(cls, d: dict | None) -> "DriveParams":
        d = d or {}
        return cls(**{k: float(v) for k, v in d.items()})


def unicycle_step(s: RoverState, cmd: RoverCommand, dt: float, drive: DriveParams = DriveParams()) -> RoverState:
    """Advance ``dt`` seconds holding ``cmd``.

    Speeds follow the exact first-order response toward the (clamped)
    command; the pose is integrated over sub-steps with the average speed
    and mid-step heading of each sub-step.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    vc = min(max(cmd.v, -drive.v_max), drive.v_max)
    wc = min(max(cmd.omega, -drive.omega_max), drive.omega_max)
    n = max(1, int(math.ceil(dt / drive.substep - 1e-9)))
    h = dt / n
    av = math.exp(-h / drive.tau_v)
    aw = math.exp(-h / drive.tau_omega)
    # mean of the exponential over one sub-step
    mv = drive.tau_v / h * (1.0 - av)
    mw = drive.tau_omega / h * (1.0 - aw)
    x, y, th, v, w = s.x, s.y, s.heading, s.v_actual, s.omega_actual
    for _ in range(n):
        v_mean = vc + (v - vc) * mv
        w_mean = wc + (w - wc) * mw
        th_mid = th + 0.5 * w_mean * h
        x += v_mean * math.cos(th_mid) * h
        y += v_mean * math.sin(th_mid) * h
        th += w_mean * h
        v = vc + (v - vc) * av
        w = wc + (w - wc) * aw
    return RoverState(x, y, th, v, w)
