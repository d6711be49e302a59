"""Ellipsoidal recoverable-set certificates.

The certificate shape comes from a Lyapunov equation on the closed-loop
linearization; its size is the largest level for which every sampled
boundary state is driven back to the origin by the nonlinear sampled-data
closed loop.  Certification is therefore simulation-based: a level passes
only if all boundary samples recover (index < tol within t_max seconds).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from . import kernels
from .control import SafeGain, linearize
from .params import PendulumParams


class RoaError(RuntimeError):
    pass


@dataclass(frozen=True)
class EllipsoidCert:
    """Recoverable set {x : x^T P x < 1}."""

    P: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("P must be square")
        if not np.allclose(P, P.T, rtol=0, atol=1e-12 * max(1.0, np.abs(P).max())):
            raise ValueError("P must be symmetric")
        P = 0.5 * (P + P.T)
        if np.linalg.eigvalsh(P).min() <= 0:
            raise ValueError("P must be positive definite")
        object.__setattr__(self, "P", P)

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    def scaled(self, factor: float) -> "EllipsoidCert":
        """Certificate with P multiplied by ``factor`` (factor < 1 inflates the set)."""
        return EllipsoidCert(self.P * factor, dict(self.meta, scaled=factor))

    def save(self, path) -> None:
        lines = ["# dualsimplex ellipsoid certificate", "schema_version: 1", f"dim: {self.dim}"]
        for k in sorted(self.meta):
            lines.append(f"{k}: {self.meta[k]}")
        lines.append("P:")
        lines.append(" ".join(repr(float(v)) for v in self.P.ravel()))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "EllipsoidCert":
        meta: dict = {}
        dim = None
        values = None
        text = Path(path).read_text().splitlines()
        for i, line in enumerate(text):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line == "P:":
                values = np.array([float(v) for v in " ".join(text[i + 1:]).split()])
                break
            key, _, val = line.partition(":")
            val = val.strip()
            if key == "dim":
                dim = int(val)
            elif key != "schema_version":
                meta[key] = val
        if dim is None or values is None or values.size != dim * dim:
            raise ValueError(f"malformed certificate file {path}")
        return cls(values.reshape(dim, dim), meta)


def instability_index(x, cert: EllipsoidCert) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ cert.P @ x)


def sphere_directions(dim: int, grid: float) -> np.ndarray:
    """Deterministic quasi-uniform unit vectors with geodesic spacing ~``grid``.

    Nested hyperspherical coordinates: the polar angle is sampled uniformly
    and each latitude sub-sphere gets a point count proportional to its
    radius, so neighbouring points sit about ``grid`` apart everywhere.
    """
    if grid <= 0:
        raise ValueError("grid must be positive")
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    if dim == 2:
        n = max(1, int(round(2 * math.pi / grid)))
        a = 2 * math.pi * np.arange(n) / n
        return np.column_stack([np.cos(a), np.sin(a)])
    n = max(1, int(round(math.pi / grid)))
    rows = []
    for psi in math.pi * np.arange(n + 1) / n:
        s = math.sin(psi)
        if s < 1e-12:
            head = np.zeros(dim)
            head[0] = math.cos(psi)
            rows.append(head[None, :])
            continue
        sub = sphere_directions(dim - 1, grid / s)
        rows.append(np.column_stack([np.full(len(sub), math.cos(psi)), s * sub]))
    return np.vstack(rows)


def boundary_points(P: np.ndarray, directions: np.ndarray, level: float = 1.0) -> np.ndarray:
    """Map unit directions onto {x : x^T P x = level}."""
    L = np.linalg.cholesky(P)
    return np.sqrt(level) * np.linalg.solve(L.T, directions.T).T


@dataclass(frozen=True)
class RoaOptions:
    Q: np.ndarray | None = None  # identity when None
    grid: float = 0.2
    t_max: float = 5.0
    tol: float = 0.01
    dt: float = 0.004
    substeps: int = 4
    margin: float = 0.02  # fractional shrink of the boundary radius
    rel_tol: float = 1e-3
    robust_perturb: float = 0.05  # 0 disables parameter-robust certification
    max_expand: int = 40


class ClosedLoop:
    """Interface used by the level search: shape and a batched recovery test."""

    dim: int

    def closed_loop_matrix(self) -> np.ndarray:
        raise NotImplementedError

    def recovers(self, X: np.ndarray, P: np.ndarray, opts: RoaOptions, stop_early: bool) -> np.ndarray:
        raise NotImplementedError


class PendulumLoop(ClosedLoop):
    dim = 4

    def __init__(self, p: PendulumParams, g: SafeGain, param_sets: Sequence[PendulumParams] | None = None):
        self.p = p
        self.g = g
        self.param_sets = list(param_sets) if param_sets is not None else [p]

    def closed_loop_matrix(self) -> np.ndarray:
        A, B = linearize(self.p)
        return A - B @ self.g.K[None, :]

    def recovers(self, X, P, opts, stop_early):
        ok_all = np.ones(len(X), dtype=bool)
        for ps in self.param_sets:
            ok, _ = kernels.recover(X, self.g.K, self.g.reference, P, ps.coeffs(), opts.dt, opts.substeps, opts.t_max, opts.tol, stop_early)
            if stop_early and not ok.all():
                return ok & ok_all
            ok_all &= ok
        return ok_all


class ScalarCubicLoop(ClosedLoop):
    """x' = -x + x^3 (K = 0).  The exact region of attraction is |x| < 1."""

    dim = 1

    def closed_loop_matrix(self):
        return np.array([[-1.0]])

    def recovers(self, X, P, opts, stop_early=False):
        x = np.asarray(X, dtype=float)[:, 0].copy()
        h = opts.dt / opts.substeps
        f = lambda z: -z + z**3
        ok = np.zeros(len(x), dtype=bool)
        steps = int(round(opts.t_max / opts.dt))
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(steps + 1):
                ok |= np.isfinite(x) & (P[0, 0] * x * x < opts.tol)
                if k == steps:
                    break
                for _ in range(opts.substeps):
                    k1 = f(x)
                    k2 = f(x + 0.5 * h * k1)
                    k3 = f(x + 0.5 * h * k2)
                    k4 = f(x + h * k3)
                    x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                x = np.where(np.abs(x) < 1e6, x, np.nan)
        return ok


def lyapunov_shape(Acl: np.ndarray, Q=None) -> np.ndarray:
    """P0 solving Acl^T P0 + P0 Acl = -Q."""
    Acl = np.asarray(Acl, dtype=float)
    n = Acl.shape[0]
    if np.max(np.linalg.eigvals(Acl).real) >= 0:
        raise RoaError("closed-loop linearization is not Hurwitz")
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    P0 = solve_continuous_lyapunov(Acl.T, -Q)
    return 0.5 * (P0 + P0.T)


def _level_ok(loop: ClosedLoop, P0, dirs, level, opts, stop_early=True) -> bool:
    X = boundary_points(P0, dirs, level)
    return bool(loop.recovers(X, P0 / level, opts, stop_early).all())


def search_level(loop: ClosedLoop, P0: np.ndarray, dirs: np.ndarray, opts: RoaOptions) -> float:
    """Largest level c (to rel_tol) whose boundary samples all recover."""
    lo, hi = None, None
    c = 1.0
    for _ in range(opts.max_expand):
        if _level_ok(loop, P0, dirs, c, opts):
            lo = c
            if hi is not None:
                break
            c *= 4.0
        else:
            hi = c
            if lo is not None:
                break
            c /= 4.0
    if lo is None:
        raise RoaError("no recoverable level found")
    if hi is None:
        raise RoaError("recoverable set appears unbounded; level search did not terminate")
    while hi / lo - 1.0 > opts.rel_tol:
        mid = math.sqrt(lo * hi)
        if _level_ok(loop, P0, dirs, mid, opts):
            lo = mid
        else:
            hi = mid
    return lo


def estimate_level(loop: ClosedLoop, opts: RoaOptions, robust_loop: ClosedLoop | None = None):
    """Return (P0, certified level) for a generic closed loop."""
    P0 = lyapunov_shape(loop.closed_loop_matrix(), opts.Q)
    dirs = sphere_directions(loop.dim, opts.grid)
    level = search_level(loop, P0, dirs, opts)
    level *= (1.0 - opts.margin) ** 2
    if robust_loop is not None:
        # shrink until every perturbed model also recovers from the boundary
        for _ in range(60):
            if _level_ok(robust_loop, P0, dirs, level, opts):
                break
            level *= 0.95
        else:
            raise RoaError("no level survives the parameter perturbations")
    if not _level_ok(loop, P0, dirs, level, opts, stop_early=False):
        raise RoaError("certified level failed re-verification")
    return P0, level


def _digest(arr) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype=float).tobytes()).hexdigest()[:16]


def estimate_roa(p: PendulumParams, g: SafeGain, opts: RoaOptions | None = None) -> EllipsoidCert:
    opts = opts or RoaOptions()
    loop = PendulumLoop(p, g)
    robust = PendulumLoop(p, g, p.perturbations(opts.robust_perturb)) if opts.robust_perturb > 0 else None
    P0, level = estimate_level(loop, opts, robust)
    meta = {
        "params_hash": p.digest(),
        "gain_hash": _digest(g.K),
        "grid": opts.grid,
        "perturb": opts.robust_perturb,
        "level": repr(level),
        "margin": opts.margin,
    }
    return EllipsoidCert(P0 / level, meta)


@dataclass
class RoaReport:
    false_positive_count: int
    samples_tested: int
    boundary_points: int
    parameter_sets: int
    failures_per_set: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.false_positive_count == 0


def validate_loop(cert: EllipsoidCert, loops: Sequence[ClosedLoop], grid: float, opts: RoaOptions | None = None) -> RoaReport:
    opts = opts or RoaOptions()
    dirs = sphere_directions(cert.dim, grid)
    X = boundary_points(cert.P, dirs)
    fails = []
    for loop in loops:
        ok = loop.recovers(X, cert.P, opts, False)
        fails.append(int((~ok).sum()))
    return RoaReport(sum(fails), len(X) * len(loops), len(X), len(loops), fails)


def validate_roa(cert: EllipsoidCert, p: PendulumParams, g: SafeGain, perturb: float = 0.05, grid: float = 0.05,
                 opts: RoaOptions | None = None) -> RoaReport:
    """Count boundary states that the safe controller fails to recover.

    Every boundary sample is re-simulated under the nominal parameters and
    under each uncertain parameter scaled by 1 - perturb and 1 + perturb.
    """
    loops = [PendulumLoop(ps, g) for ps in p.perturbations(perturb)]
    return validate_loop(cert, loops, grid, opts)
