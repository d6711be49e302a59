"""Linearization, pole placement and the pendulum's safety-domain controllers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import dynamics, pendulum_energy, wrap_state
from .params import PendulumParams

DEFAULT_POLES = (-6.0, -7.0, -8.0, -9.0)


class ControlDesignError(ValueError):
    pass


@dataclass(frozen=True)
class SafeGain:
    K: np.ndarray
    reference: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        object.__setattr__(self, "K", np.asarray(self.K, dtype=float).reshape(4))
        object.__setattr__(self, "reference", np.asarray(self.reference, dtype=float).reshape(4))

    def with_reference(self, reference) -> "SafeGain":
        return SafeGain(self.K, reference)


@dataclass(frozen=True)
class SwingUpGains:
    """Energy-pumping gains.

    ``k_e`` maps the energy error (J) to a commanded arm acceleration
    (rad/s^2), saturated at ``a_max``.  The energy target sits
    ``energy_offset`` (fraction of m g l) above upright so friction losses
    near the top are overcompensated.
    """

    k_e: float = 20000.0
    u_max: float = 10.0
    a_max: float = 80.0
    energy_offset: float = 0.05

    def __post_init__(self):
        if not self.k_e > 0:
            raise ValueError("k_e must be > 0")
        if not (self.u_max > 0 and self.a_max > 0):
            raise ValueError("u_max and a_max must be > 0")


def linearize(p: PendulumParams, x0=None, u0: float = 0.0, eps: float = 1e-6, tol: float = 1e-9):
    """Central-difference Jacobians (A, B) of the dynamics at an equilibrium."""
    x0 = np.zeros(4) if x0 is None else np.asarray(x0, dtype=float)
    f0 = dynamics(x0, u0, p)
    if np.linalg.norm(f0) > tol:
        raise ControlDesignError(f"not an equilibrium: |f(x0,u0)| = {np.linalg.norm(f0):.3g}")
    A = np.empty((4, 4))
    for j in range(4):
        d = np.zeros(4)
        d[j] = eps
        A[:, j] = (dynamics(x0 + d, u0, p) - dynamics(x0 - d, u0, p)) / (2 * eps)
    B = ((dynamics(x0, u0 + eps, p) - dynamics(x0, u0 - eps, p)) / (2 * eps)).reshape(4, 1)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ControlDesignError("non-finite linearization")
    return A, B


def controllability(A, B) -> np.ndarray:
    n = A.shape[0]
    cols = [B]
    for _ in range(n - 1):
        cols.append(A @ cols[-1])
    return np.hstack(cols)


def _check_conjugate_closed(poles, tol=1e-9):
    poles = np.asarray(poles, dtype=complex)
    remaining = list(poles)
    while remaining:
        q = remaining.pop()
        if abs(q.imag) <= tol:
            continue
        match = [i for i, r in enumerate(remaining) if abs(r - np.conj(q)) <= tol * max(1.0, abs(q))]
        if not match:
            raise ControlDesignError(f"pole {q} has no conjugate partner")
        remaining.pop(match[0])


def ackermann(A, B, poles) -> np.ndarray:
    """Single-input Ackermann formula: K = e_n^T C^-1 phi(A)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], 1)
    n = A.shape[0]
    if len(poles) != n:
        raise ControlDesignError(f"need {n} poles, got {len(poles)}")
    _check_conjugate_closed(poles)
    C = controllability(A, B)
    if np.linalg.matrix_rank(C) < n:
        raise ControlDesignError("(A, B) is not controllable")
    coeffs = np.real(np.poly(np.asarray(poles, dtype=complex)))
    phi = np.zeros_like(A)
    for a in coeffs:
        phi = phi @ A + a * np.eye(n)
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    return np.linalg.solve(C.T, e_n) @ phi


def pole_place(A, B, poles=DEFAULT_POLES) -> SafeGain:
    """Gain placing the spectrum of A - B K at ``poles``."""
    return SafeGain(ackermann(A, B, poles))


def safe_control(x, g: SafeGain, u_max: float) -> float:
    """u = K (reference - x) on the wrapped state, saturated."""
    e = g.reference - wrap_state(x)
    return float(np.clip(g.K @ e, -u_max, u_max))


def swing_up_accel(x, gains: SwingUpGains, p: PendulumParams) -> float:
    """Arm acceleration a = sat(k_e (E - E_ref) sign(dtheta_p cos theta_p), a_max)."""
    th, _, dth, _ = np.asarray(x, dtype=float)
    e_ref = (1.0 + gains.energy_offset) * pendulum_energy(np.zeros(4), p)
    a = gains.k_e * (pendulum_energy(x, p) - e_ref) * np.sign(dth * np.cos(th))
    return float(np.clip(a, -gains.a_max, gains.a_max))


def accel_to_voltage(x, a: float, p: PendulumParams) -> float:
    """Voltage producing arm acceleration ``a`` (partial feedback linearization)."""
    th, _, dth, dal = np.asarray(x, dtype=float)
    j0, j2, mll, mgl, b1, b2, km, rm, _ = p.coeffs()
    s, co = np.sin(th), np.cos(th)
    m11 = j0 + j2 * s * s
    m12 = mll * co
    det = m11 * j2 - m12 * m12
    r1_free = -b1 * dal - 2.0 * j2 * s * co * dal * dth + mll * s * dth * dth
    r2 = -b2 * dth + j2 * s * co * dal * dal + mgl * s
    torque = (a * det + m12 * r2) / j2 - r1_free
    return float(torque * rm / km + km * dal)


def swing_up(x, gains: SwingUpGains, p: PendulumParams) -> float:
    """Energy-based swing-up voltage, saturated at ``gains.u_max``.

    Zero at upright rest and at down-hanging rest (the sign term vanishes),
    so a small initial kick is needed to start pumping.
    """
    u = accel_to_voltage(x, swing_up_accel(x, gains, p), p)
    return float(np.clip(u, -gains.u_max, gains.u_max))


def smooth_action(u_now: float, u_prev: float) -> float:
    """Two-sample moving average applied on the high-performance path."""
    return 0.5 * (u_now + u_prev)
