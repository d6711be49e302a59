"""2-D segment geometry: ray casting and clearance queries.

Segments are rows (x1, y1, x2, y2) of a float array.  ``raycast_nb`` is
the compiled scalar loop, ``raycast_np`` its batched numpy twin.
"""

import numpy as np

from .._jit import NUMBA_ENABLED, njit

EPS = 1e-12


@njit
def raycast_nb(px, py, heading, angles, segs, max_range):
    out = np.empty(angles.shape[0])
    for a in range(angles.shape[0]):
        th = heading + angles[a]
        dx = np.cos(th)
        dy = np.sin(th)
        best = max_range
        for j in range(segs.shape[0]):
            sx = segs[j, 2] - segs[j, 0]
            sy = segs[j, 3] - segs[j, 1]
            den = dx * sy - dy * sx
            if abs(den) < EPS:
                continue
            qx = segs[j, 0] - px
            qy = segs[j, 1] - py
            t = (qx * sy - qy * sx) / den
            u = (qx * dy - qy * dx) / den
            if t >= 0.0 and 0.0 <= u <= 1.0 and t < best:
                best = t
        out[a] = best
    return out


def raycast_np(px, py, heading, angles, segs, max_range):
    th = heading + np.asarray(angles, dtype=float)[:, None]
    dx, dy = np.cos(th), np.sin(th)
    segs = np.asarray(segs, dtype=float).reshape(-1, 4)
    sx = (segs[:, 2] - segs[:, 0])[None, :]
    sy = (segs[:, 3] - segs[:, 1])[None, :]
    qx = (segs[:, 0] - px)[None, :]
    qy = (segs[:, 1] - py)[None, :]
    den = dx * sy - dy * sx
    ok = np.abs(den) >= EPS
    safe = np.where(ok, den, 1.0)
    t = (qx * sy - qy * sx) / safe
    u = (qx * dy - qy * dx) / safe
    hit = ok & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
    t = np.where(hit, t, np.inf)
    if t.shape[1] == 0:
        return np.full(th.shape[0], float(max_range))
    return np.minimum(t.min(axis=1), max_range)


def raycast_segments(px, py, heading, angles, segs, max_range=100.0):
    angles = np.ascontiguousarray(angles, dtype=float)
    segs = np.ascontiguousarray(segs, dtype=float).reshape(-1, 4)
    if NUMBA_ENABLED:
        return raycast_nb(float(px), float(py), float(heading), angles, segs, float(max_range))
    return raycast_np(float(px), float(py), float(heading), angles, segs, float(max_range))


@njit
def min_distance_nb(px, py, segs):
    best = np.inf
    for j in range(segs.shape[0]):
        x1 = segs[j, 0]
        y1 = segs[j, 1]
        sx = segs[j, 2] - x1
        sy = segs[j, 3] - y1
        L2 = sx * sx + sy * sy
        t = 0.0
        if L2 > 0.0:
            t = ((px - x1) * sx + (py - y1) * sy) / L2
            t = min(1.0, max(0.0, t))
        ex = x1 + t * sx - px
        ey = y1 + t * sy - py
        d = np.sqrt(ex * ex + ey * ey)
        if d < best:
            best = d
    return best


def min_distance_np(px, py, segs):
    segs = np.asarray(segs, dtype=float).reshape(-1, 4)
    if len(segs) == 0:
        return np.inf
    s = segs[:, 2:] - segs[:, :2]
    L2 = (s**2).sum(axis=1)
    rel = np.array([px, py]) - segs[:, :2]
    t = np.where(L2 > 0, (rel * s).sum(axis=1) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    e = segs[:, :2] + t[:, None] * s - np.array([px, py])
    return float(np.sqrt((e**2).sum(axis=1)).min())


def min_distance(px, py, segs) -> float:
    segs = np.ascontiguousarray(segs, dtype=float).reshape(-1, 4)
    if NUMBA_ENABLED:
        return float(min_distance_nb(float(px), float(py), segs))
    return float(min_distance_np(float(px), float(py), segs))


def polygon_segments(poly) -> np.ndarray:
    p = np.asarray(poly, dtype=float).reshape(-1, 2)
    return np.hstack([p, np.roll(p, -1, axis=0)])


def box_polygon(x, y, size, theta=0.0) -> np.ndarray:
    """Rectangle centred at (x, y); ``size`` is an edge length or a (length, width) pair."""
    hx, hy = 0.5 * np.broadcast_to(np.asarray(size, dtype=float), (2,))
    c, s = np.cos(theta), np.sin(theta)
    corners = np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]])
    R = np.array([[c, -s], [s, c]])
    return corners @ R.T + np.array([x, y])
