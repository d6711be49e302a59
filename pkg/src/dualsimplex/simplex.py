"""Simplex supervisor: mode selection from monitor verdicts.

Pendulum verdicts carry the instability index x^T P x, rover verdicts a
safety zone.  ``decide`` is total over (mode, verdict) pairs and also
returns the reason for a switch so runtimes can log it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Mode(str, Enum):
    SWING_UP = "SwingUp"
    SAFE_RECOVER = "SafeRecover"
    HIGH_PERFORMANCE = "HighPerformance"
    SAFETY_STOP = "SafetyStop"


class Zone(int, Enum):
    Z0 = 0
    Z1 = 1
    Z2 = 2
    Z3 = 3


@dataclass(frozen=True)
class SwitchPolicy:
    exit_threshold: float = 1.0
    enter_threshold: float = 0.1
    max_hp_age: int = 4000  # us
    require_ack_after_stop: bool = True
    predict: bool = False

    def __post_init__(self):
        if not 0 < self.enter_threshold < self.exit_threshold <= 1:
            raise ValueError("need 0 < enter_threshold < exit_threshold <= 1")
        if self.max_hp_age < 0:
            raise ValueError("max_hp_age must be >= 0")

    @classmethod
    def from_dict(cls, d: dict | None, **defaults) -> "SwitchPolicy":
        d = dict(defaults, **(d or {}))
        return cls(
            exit_threshold=float(d.get("exit_threshold", 1.0)),
            enter_threshold=float(d.get("enter_threshold", 0.1)),
            max_hp_age=int(d.get("max_hp_age_us", 4000)),
            require_ack_after_stop=bool(d.get("require_ack_after_stop", True)),
            predict=bool(d.get("predict", False)),
        )


@dataclass(frozen=True)
class MonitorVerdict:
    index: float | None = None
    zone: Zone | None = None
    hp_fresh: bool = True
    predicted_index: float | None = None
    operator_ack: bool = False

    def __post_init__(self):
        if (self.index is None) == (self.zone is None):
            raise ValueError("a verdict carries exactly one of index or zone")
        if self.index is not None and not self.index >= 0:
            raise ValueError("index must be >= 0")


def _decide_index(mode: Mode, v: MonitorVerdict, policy: SwitchPolicy):
    if mode is Mode.SWING_UP:
        if v.index < policy.exit_threshold:
            return Mode.SAFE_RECOVER, "entered_R"
        return mode, None
    if mode is Mode.HIGH_PERFORMANCE:
        if v.index >= policy.exit_threshold:
            return Mode.SAFE_RECOVER, "index"
        if not v.hp_fresh:
            return Mode.SAFE_RECOVER, "stale"
        if policy.predict and v.predicted_index is not None and v.predicted_index >= policy.exit_threshold:
            return Mode.SAFE_RECOVER, "predicted"
        return mode, None
    if mode is Mode.SAFE_RECOVER:
        if v.index < policy.enter_threshold and v.hp_fresh:
            return Mode.HIGH_PERFORMANCE, "in_S"
        return mode, None
    # SafetyStop is not part of the pendulum flow; hand control to the safe controller
    return Mode.SAFE_RECOVER, "reset"


def _decide_zone(mode: Mode, v: MonitorVerdict, policy: SwitchPolicy):
    if mode is Mode.SAFETY_STOP:
        if v.operator_ack or not policy.require_ack_after_stop:
            if v.zone is Zone.Z3:
                return mode, None
            return Mode.HIGH_PERFORMANCE, "ack" if v.operator_ack else "clear"
        return mode, None
    if v.zone is Zone.Z3:
        return Mode.SAFETY_STOP, "Z3"
    if mode is not Mode.HIGH_PERFORMANCE:
        return Mode.HIGH_PERFORMANCE, "reset"
    return mode, None


def decide(mode: Mode, verdict: MonitorVerdict, policy: SwitchPolicy):
    """(next_mode, cause) where cause is None when the mode is kept."""
    if verdict.index is not None:
        return _decide_index(Mode(mode), verdict, policy)
    return _decide_zone(Mode(mode), verdict, policy)


def supervise(mode: Mode, verdict: MonitorVerdict, policy: SwitchPolicy) -> Mode:
    return decide(mode, verdict, policy)[0]


def cap_speed(u, cap: float | None):
    """Clamp the linear-speed component of ``u`` to [-cap, cap]."""
    u = np.array(u, dtype=float)
    if cap is not None:
        u[0] = min(max(u[0], -cap), cap)
    return u


def select_actuation(mode: Mode, u_hp, u_safe, u_swing, zone_limit: float | None = None):
    """Output of the controller owning ``mode``.

    A zero command in SafetyStop; in HighPerformance the optional zone cap
    saturates the linear speed.  Scalars stay scalars.
    """
    mode = Mode(mode)
    if mode is Mode.SAFETY_STOP:
        return np.zeros_like(np.asarray(u_hp, dtype=float))
    if mode is Mode.SAFE_RECOVER:
        return u_safe
    if mode is Mode.SWING_UP:
        return u_swing
    if zone_limit is None:
        return u_hp
    if np.ndim(u_hp) == 0:
        return float(min(max(u_hp, -zone_limit), zone_limit))
    return cap_speed(u_hp, zone_limit)
