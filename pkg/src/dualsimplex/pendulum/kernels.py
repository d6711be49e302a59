"""Hot numeric kernels for the pendulum: dynamics, RK4 and closed-loop rollouts.

State order is (theta_p, alpha_a, dtheta_p, dalpha_a) with theta_p = 0 at
upright.  ``rhs`` and ``rk4`` are elementwise, so the same source serves
scalar compiled loops and batched numpy arrays.
"""

import numpy as np

from .._jit import NUMBA_ENABLED, njit

TWO_PI = 2.0 * np.pi


@njit
def wrap_angle(a):
    """Map to (-pi, pi]."""
    return np.pi - np.mod(np.pi - a, TWO_PI)


@njit
def rhs(th, al, dth, dal, u, c):
    s = np.sin(th)
    co = np.cos(th)
    j0 = c[0]
    j2 = c[1]
    mll = c[2]
    mgl = c[3]
    km = c[6]
    torque = km * (u - km * dal) / c[7]
    s2 = 2.0 * s * co
    m11 = j0 + j2 * s * s
    m12 = mll * co
    r1 = torque - c[4] * dal - j2 * s2 * dal * dth + mll * s * dth * dth
    r2 = -c[5] * dth + 0.5 * j2 * s2 * dal * dal + mgl * s
    det = m11 * j2 - m12 * m12
    ddal = (j2 * r1 - m12 * r2) / det
    ddth = (m11 * r2 - m12 * r1) / det
    return dth, dal, ddth, ddal


@njit
def rk4(th, al, dth, dal, u, h, c):
    k1 = rhs(th, al, dth, dal, u, c)
    hh = 0.5 * h
    k2 = rhs(th + hh * k1[0], al + hh * k1[1], dth + hh * k1[2], dal + hh * k1[3], u, c)
    k3 = rhs(th + hh * k2[0], al + hh * k2[1], dth + hh * k2[2], dal + hh * k2[3], u, c)
    k4 = rhs(th + h * k3[0], al + h * k3[1], dth + h * k3[2], dal + h * k3[3], u, c)
    w = h / 6.0
    return (
        th + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        al + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        dth + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        dal + w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    )


@njit
def integrate(x, u, dt, nsub, c):
    """Hold ``u`` for ``dt`` seconds using ``nsub`` RK4 sub-steps."""
    umax = c[8]
    if u > umax:
        u = umax
    elif u < -umax:
        u = -umax
    h = dt / nsub
    th, al, dth, dal = x[0], x[1], x[2], x[3]
    for _ in range(nsub):
        th, al, dth, dal = rk4(th, al, dth, dal, u, h, c)
    out = np.empty(4)
    out[0] = th
    out[1] = al
    out[2] = dth
    out[3] = dal
    return out


@njit
def _quad4(a, b, cc, d, P):
    return (
        P[0, 0] * a * a + P[1, 1] * b * b + P[2, 2] * cc * cc + P[3, 3] * d * d
        + 2.0 * (P[0, 1] * a * b + P[0, 2] * a * cc + P[0, 3] * a * d
                 + P[1, 2] * b * cc + P[1, 3] * b * d + P[2, 3] * cc * d)
    )


@njit
def recover_nb(X0, K, ref, P, c, dt, nsub, t_max, tol, stop_early):
    """Sampled-data rollout of the safe controller from each row of ``X0``.

    Returns (recovered, time_to_tol).  A sample counts as recovered once the
    wrapped-state index drops below ``tol`` within ``t_max`` seconds without
    blowing up.  With ``stop_early`` the loop returns after the first failure
    (remaining entries stay False / -1).
    """
    n = X0.shape[0]
    ok = np.zeros(n, dtype=np.bool_)
    t_hit = -np.ones(n)
    umax = c[8]
    steps = int(round(t_max / dt))
    h = dt / nsub
    for i in range(n):
        th, al, dth, dal = X0[i, 0], X0[i, 1], X0[i, 2], X0[i, 3]
        for k in range(steps + 1):
            wth = wrap_angle(th)
            wal = wrap_angle(al)
            if _quad4(wth, wal, dth, dal, P) < tol:
                ok[i] = True
                t_hit[i] = k * dt
                break
            if k == steps:
                break
            u = K[0] * (ref[0] - wth) + K[1] * (ref[1] - wal) + K[2] * (ref[2] - dth) + K[3] * (ref[3] - dal)
            if u > umax:
                u = umax
            elif u < -umax:
                u = -umax
            for _ in range(nsub):
                th, al, dth, dal = rk4(th, al, dth, dal, u, h, c)
            if not (abs(th) < 1e6 and abs(al) < 1e6 and abs(dth) < 1e6 and abs(dal) < 1e6):
                break
        if stop_early and not ok[i]:
            break
    return ok, t_hit


def recover_np(X0, K, ref, P, c, dt, nsub, t_max, tol, stop_early=False):
    """Batched numpy twin of :func:`recover_nb` (all rows advance together)."""
    X0 = np.asarray(X0, dtype=float)
    n = X0.shape[0]
    th, al, dth, dal = (X0[:, j].copy() for j in range(4))
    ok = np.zeros(n, dtype=bool)
    dead = np.zeros(n, dtype=bool)
    t_hit = -np.ones(n)
    umax = c[8]
    steps = int(round(t_max / dt))
    h = dt / nsub
    for k in range(steps + 1):
        wth = wrap_angle(th)
        wal = wrap_angle(al)
        z = np.stack([wth, wal, dth, dal])
        idx = np.einsum("in,ij,jn->n", z, P, z)
        hit = (idx < tol) & ~ok & ~dead
        ok |= hit
        t_hit[hit] = k * dt
        active = ~(ok | dead)
        if k == steps or not active.any():
            break
        if stop_early and dead.any():
            break
        e = np.asarray(ref)[:, None] - z
        u = np.clip(np.asarray(K) @ e, -umax, umax)
        for _ in range(nsub):
            th, al, dth, dal = rk4(th, al, dth, dal, u, h, c)
        with np.errstate(invalid="ignore"):
            blown = ~((np.abs(th) < 1e6) & (np.abs(al) < 1e6) & (np.abs(dth) < 1e6) & (np.abs(dal) < 1e6))
        dead |= blown & ~ok
        # frozen rows keep finite values so later arithmetic stays quiet
        for arr in (th, al, dth, dal):
            arr[dead] = 0.0
    return ok, t_hit


def recover(X0, K, ref, P, c, dt, nsub, t_max, tol, stop_early=False):
    """Dispatch to the compiled loop or the batched numpy path."""
    X0 = np.ascontiguousarray(X0, dtype=float)
    args = (
        X0,
        np.ascontiguousarray(K, dtype=float),
        np.ascontiguousarray(ref, dtype=float),
        np.ascontiguousarray(P, dtype=float),
        np.ascontiguousarray(c, dtype=float),
        float(dt),
        int(nsub),
        float(t_max),
        float(tol),
        bool(stop_early),
    )
    if NUMBA_ENABLED:
        return recover_nb(*args)
    return recover_np(*args)
