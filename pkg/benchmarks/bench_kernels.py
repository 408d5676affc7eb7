"""Timing comparison of the numba kernels against the numpy fallback.

Runs each hot kernel on realistic problem sizes with both backends and
prints a table of best-of-n wall times. The numba column includes a warmup
call so JIT compilation is not billed to the measurement.

Usage: python benchmarks/bench_kernels.py [--repeats N] [--scale S]
"""

import argparse
import time

import numpy as np

from edmd.kernels import numpy_backend

try:
    from edmd.kernels import numba_backend
except ImportError:
    numba_backend = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(scale):
    rng = np.random.default_rng(0)

    pts = rng.standard_normal((int(20000 * scale), 3))
    centers = rng.standard_normal((int(1000 * scale), 3))
    yield "thin_plate_matrix", lambda b: b.thin_plate_matrix(pts, centers)

    km_pts = rng.standard_normal((int(100000 * scale), 2))
    km_centers = rng.standard_normal((int(1000 * scale), 2))
    yield "kmeans_assign", lambda b: b.kmeans_assign(km_pts, km_centers)

    m = int(100000 * scale)
    x0 = rng.uniform(-1, 1, size=m)
    dw_noise = rng.normal(scale=0.02, size=(m, 100))
    yield "double_well_em", lambda b: b.double_well_em(x0, dw_noise, 1e-3)

    p0 = rng.uniform(0.5, 5.5, size=(m, 2))
    rect_noise = rng.normal(scale=0.06, size=(m, 100, 2))
    bounds = np.array([[0.0, 3 * np.pi], [0.0, 2 * np.pi]])
    yield "rect_em", lambda b: b.rect_em(p0, rect_noise, bounds)

    states = rng.uniform(-2, 2, size=(int(10000 * scale), 2))
    yield "duffing_rk4", lambda b: b.duffing_rk4(states, 0.01, 25)

    basin_pts = rng.uniform(-2, 2, size=(int(200 * scale), 2))
    yield "duffing_basin", lambda b: b.duffing_basin(basin_pts, 0.01, 200.0, 1e-3)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0,
                    help="shrink or grow every problem size")
    args = ap.parse_args()

    header = f"{'kernel':<20} {'numpy':>12} {'numba':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, call in cases(args.scale):
        t_np = best_of(lambda: call(numpy_backend), args.repeats)
        if numba_backend is None:
            print(f"{name:<20} {t_np:>10.4f} s {'n/a':>12} {'n/a':>9}")
            continue
        call(numba_backend)
        t_nb = best_of(lambda: call(numba_backend), args.repeats)
        print(f"{name:<20} {t_np:>10.4f} s {t_nb:>10.4f} s {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
