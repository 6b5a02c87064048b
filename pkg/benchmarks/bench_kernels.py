"""Compare the compiled and NumPy kernels on the hot loops.

    python benchmarks/bench_kernels.py [--n 2000000] [--repeat 3]
"""
import argparse
import math
import time

import numpy as np

from obversim import density as dens
from obversim.geometry import random_points, rotation_from_axis_angle
from obversim.kernels import backends


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    pts = np.ascontiguousarray(random_points(rng, args.n))
    z = rng.uniform(-1, 1, args.n)
    phi = rng.uniform(-math.pi, math.pi, args.n)
    u = rng.random(args.n)
    rot = np.ascontiguousarray(rotation_from_axis_angle((0, 1, 0), 2 * math.pi / 3).matrix)
    out = np.empty(args.n)
    sink = np.empty((args.n, 3))

    print(f"{'kernel':<18}{'case':<6}" + "".join(f"{name:>12}" for name in backends()) + "   speedup")
    for case in ("1b", "2a", "3"):
        d = dens.builtin(case)
        bound = dens.supremum_estimate(d)
        tasks = {
            "density_values": lambda k: k.density_values(d.frame, d.coef, d.power, d.a, d.b, pts, out),
            "omega_values": lambda k: k.omega_values(d.frame, d.coef, d.power, d.a, d.b, rot, pts, 1e-300, out),
            "rejection_accept": lambda k: k.rejection_accept(
                d.frame, d.coef, d.power, d.a, d.b, z, phi, u, bound, sink, 0
            ),
        }
        for label, task in tasks.items():
            timing = {name: best_of(lambda: task(mod), args.repeat) for name, mod in backends().items()}
            cells = "".join(f"{t * 1e3:>10.1f}ms" for t in timing.values())
            speed = timing["numpy"] / timing["cython"] if "cython" in timing else float("nan")
            print(f"{label:<18}{case:<6}{cells}   {speed:6.1f}x")


if __name__ == "__main__":
    main()
