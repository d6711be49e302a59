"""Physical parameters of the rotary (Furuta) pendulum.

Geometry, masses and motor constants follow the public Quanser QUBE-Servo 2
datasheet. Arm and pendulum are modelled as uniform slender rods; the motor
is a DC motor with negligible inductance. The viscous friction values are
our own estimates for the small QUBE links (the datasheet does not list
them).
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

# Layout of the packed coefficient vector consumed by the kernels.
C_J0, C_J2, C_MLL, C_MGL, C_B1, C_B2, C_KM, C_RM, C_UMAX = range(9)
N_COEFFS = 9

UNITS = {
    "arm_mass": "kg",
    "arm_length": "m",
    "pendulum_mass": "kg",
    "pendulum_length": "m",
    "hub_inertia": "kg m^2",
    "arm_damping": "N m s/rad",
    "pendulum_damping": "N m s/rad",
    "motor_constant": "V s/rad (= N m/A)",
    "motor_resistance": "ohm",
    "gravity": "m/s^2",
    "voltage_limit": "V",
}

# Parameters scaled one at a time by validate_roa; gravity and the voltage
# limit are not model uncertainties.
UNCERTAIN = (
    "arm_mass",
    "arm_length",
    "pendulum_mass",
    "pendulum_length",
    "hub_inertia",
    "arm_damping",
    "pendulum_damping",
    "motor_constant",
    "motor_resistance",
)


@dataclass(frozen=True)
class PendulumParams:
    arm_mass: float = 0.095
    arm_length: float = 0.085
    pendulum_mass: float = 0.024
    pendulum_length: float = 0.129
    hub_inertia: float = 4.6e-6  # motor rotor + hub
    arm_damping: float = 5e-4
    pendulum_damping: float = 1e-5
    motor_constant: float = 0.042
    motor_resistance: float = 8.4
    gravity: float = 9.81
    voltage_limit: float = 10.0

    def __post_init__(self):
        for name in ("arm_mass", "arm_length", "pendulum_mass", "pendulum_length", "motor_resistance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("hub_inertia", "arm_damping", "pendulum_damping", "motor_constant", "voltage_limit"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def pendulum_inertia(self) -> float:
        """Pendulum inertia about its pivot."""
        return self.pendulum_mass * self.pendulum_length**2 / 3.0

    @property
    def arm_inertia(self) -> float:
        """Inertia about the motor axis, pendulum bob included."""
        return (
            self.arm_mass * self.arm_length**2 / 3.0
            + self.hub_inertia
            + self.pendulum_mass * self.arm_length**2
        )

    def coeffs(self) -> np.ndarray:
        c = np.empty(N_COEFFS)
        half = 0.5 * self.pendulum_length
        c[C_J0] = self.arm_inertia
        c[C_J2] = self.pendulum_inertia
        c[C_MLL] = self.pendulum_mass * self.arm_length * half
        c[C_MGL] = self.pendulum_mass * self.gravity * half
        c[C_B1] = self.arm_damping
        c[C_B2] = self.pendulum_damping
        c[C_KM] = self.motor_constant
        c[C_RM] = self.motor_resistance
        c[C_UMAX] = self.voltage_limit
        return c

    def scaled(self, name: str, factor: float) -> "PendulumParams":
        return replace(self, **{name: getattr(self, name) * factor})

    def perturbations(self, fraction: float) -> list["PendulumParams"]:
        """Nominal first, then every uncertain parameter at 1 - f and 1 + f."""
        out = [self]
        if fraction == 0:
            return out
        for name in UNCERTAIN:
            out.append(self.scaled(name, 1.0 - fraction))
            out.append(self.scaled(name, 1.0 + fraction))
        return out

    def digest(self) -> str:
        text = ",".join(f"{f.name}={getattr(self, f.name)!r}" for f in fields(self))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return asdict(self)


def load_params(path) -> PendulumParams:
    data = yaml.safe_load(Path(path).read_text()) or {}
    data.pop("schema_version", None)
    known = {f.name for f in fields(PendulumParams)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown pendulum parameter(s): {sorted(unknown)}")
    return PendulumParams(**{k: float(v) for k, v in data.items()})


def save_params(path, params: PendulumParams) -> None:
    lines = ["schema_version: 1"]
    for f in fields(params):
        lines.append(f"{f.name}: {getattr(params, f.name)!r}  # {UNITS[f.name]}")
    Path(path).write_text("\n".join(lines) + "\n")


def default_params_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "pendulum_params.yaml"
