"""Pendulum state, nonlinear dynamics and fixed-step integration."""

from __future__ import annotations

import numpy as np

from . import kernels
from .params import PendulumParams

UPRIGHT = np.zeros(4)
DOWN = np.array([np.pi, 0.0, 0.0, 0.0])
STATE_NAMES = ("theta_p", "alpha_a", "dtheta_p", "dalpha_a")
DEFAULT_SUBSTEPS = 4
BLOWUP = 1e6


class BlowUpError(ArithmeticError):
    """Integration left the finite region (some |x_i| > 1e6 or NaN)."""


def _as_state(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(4)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite pendulum state {x}")
    return x


def clamp_voltage(u: float, p: PendulumParams) -> float:
    return float(min(max(u, -p.voltage_limit), p.voltage_limit))


def dynamics(x, u: float, p: PendulumParams) -> np.ndarray:
    """State derivative f(x, u); ``u`` is clamped to the voltage limit."""
    x = _as_state(x)
    if not np.isfinite(u):
        raise ValueError("non-finite input voltage")
    out = kernels.rhs(x[0], x[1], x[2], x[3], clamp_voltage(u, p), p.coeffs())
    return np.array(out, dtype=float)


def integrate_step(x, u: float, dt: float, p: PendulumParams, substeps: int = DEFAULT_SUBSTEPS, coeffs=None) -> np.ndarray:
    """Advance ``dt`` seconds with zero-order-hold input and RK4 sub-steps."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = _as_state(x)
    c = p.coeffs() if coeffs is None else coeffs
    out = kernels.integrate(x, float(u), float(dt), int(substeps), c)
    if not np.all(np.abs(out) < BLOWUP):
        raise BlowUpError(f"pendulum state diverged: {out}")
    return out


def predict_one_step(x, u: float, p: PendulumParams, dt: float, substeps: int = DEFAULT_SUBSTEPS) -> np.ndarray:
    """One-control-period look-ahead; shares the integrator with the plant."""
    return integrate_step(x, u, dt, p, substeps)


def wrap_state(x) -> np.ndarray:
    x = np.array(x, dtype=float)
    x[..., 0] = kernels.wrap_angle(x[..., 0])
    x[..., 1] = kernels.wrap_angle(x[..., 1])
    return x


def total_energy(x, p: PendulumParams) -> float:
    """Kinetic + potential energy of arm and pendulum (motor electrical side excluded)."""
    th, _, dth, dal = _as_state(x)
    c = p.coeffs()
    s, co = np.sin(th), np.cos(th)
    kin = 0.5 * (c[0] + c[1] * s * s) * dal**2 + c[2] * co * dal * dth + 0.5 * c[1] * dth**2
    return float(kin + c[3] * co)


def pendulum_energy(x, p: PendulumParams) -> float:
    """Energy of the pendulum link alone; equals ``m g l`` at upright rest."""
    th, _, dth, _ = _as_state(x)
    c = p.coeffs()
    return float(0.5 * c[1] * dth**2 + c[3] * np.cos(th))
