"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both routes are run on identical inputs and their results compared before
timing.  With DUALSIMPLEX_DISABLE_NUMBA=1 only the numpy route is timed.
"""

import argparse
import statistics
import time

import numpy as np

from dualsimplex import _jit
from dualsimplex.pendulum import kernels
from dualsimplex.pendulum.control import linearize, pole_place
from dualsimplex.pendulum.params import PendulumParams
from dualsimplex.pendulum.roa import EllipsoidCert, RoaOptions, boundary_points, sphere_directions
from dualsimplex.pendulum.runtime import DEFAULT_CERT
from dualsimplex.rover import geometry, world
from dualsimplex.rover.safety import LIDAR_ANGLES


def timeit(fn, repeat):
    fn()  # warm-up (and JIT compile)
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts)


def roa_case(grid):
    p = PendulumParams()
    A, B = linearize(p)
    g = pole_place(A, B)
    cert = EllipsoidCert.load(DEFAULT_CERT)
    X = boundary_points(cert.P, sphere_directions(4, grid))
    o = RoaOptions()
    args = (X, g.K, g.reference, cert.P, p.coeffs(), o.dt, o.substeps, o.t_max, o.tol, False)
    return len(X), args


def rover_case(n, seed=0):
    m = world.pinned_course()
    rng = np.random.default_rng(seed)
    lo, hi = m.walls[:, :2].min(axis=0), m.walls[:, :2].max(axis=0)
    pts = rng.uniform(lo, hi, (n, 2))
    heads = rng.uniform(-np.pi, np.pi, n)
    return m.segments, pts, heads


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--grid", type=float, default=0.3, help="boundary grid for the recovery kernel")
    ap.add_argument("--poses", type=int, default=2000)
    args = ap.parse_args(argv)

    n, rargs = roa_case(args.grid)
    segs, pts, heads = rover_case(args.poses)

    def ray_np():
        return [geometry.raycast_np(x, y, h, LIDAR_ANGLES, segs, 100.0) for (x, y), h in zip(pts, heads)]

    def ray_nb():
        return [geometry.raycast_nb(x, y, h, LIDAR_ANGLES, segs, 100.0) for (x, y), h in zip(pts, heads)]

    def md_np():
        return [geometry.min_distance_np(x, y, segs) for x, y in pts]

    def md_nb():
        return [geometry.min_distance_nb(x, y, segs) for x, y in pts]

    cases = [
        (f"recover ({n} boundary states)", lambda: kernels.recover_np(*rargs), lambda: kernels.recover_nb(*rargs)),
        (f"raycast x3 ({args.poses} poses)", ray_np, ray_nb),
        (f"min_distance ({args.poses} poses)", md_np, md_nb),
    ]
    print(f"numba enabled: {_jit.NUMBA_ENABLED}")
    print(f"{'kernel':34s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}")
    for name, f_np, f_nb in cases:
        t_np = timeit(f_np, args.repeat)
        if not _jit.NUMBA_ENABLED:
            print(f"{name:34s} {t_np:10.4f} {'-':>10s} {'-':>8s}")
            continue
        a, b = f_np(), f_nb()
        if isinstance(a, tuple):  # recover returns (ok, t_hit)
            assert np.array_equal(a[0], b[0]), "routes disagree on recovery"
        else:
            assert np.allclose(np.array(a), np.array(b), atol=1e-9), "routes disagree"
        t_nb = timeit(f_nb, args.repeat)
        print(f"{name:34s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
