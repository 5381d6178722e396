#!/usr/bin/env python3
"""Benchmark the hot kernels on both backends.

Usage:  python benchmarks/bench_kernels.py [--repeats N] [--profile small|camera|large]

Times connected-component labeling, disk rasterization, and single-bin
tone power for the numba and pure-numpy implementations.  The numba path
is warmed (and its cache populated) before timing.
"""

import argparse
import time

import numpy as np

from catos import kernels

PROFILES = {
    "small": dict(mask=(48, 64), density=0.08, disks=3, samples=4800),
    "camera": dict(mask=(48, 64), density=0.25, disks=6, samples=4800),
    "large": dict(mask=(480, 640), density=0.15, disks=24, samples=48000),
}


def bench(fn, repeats):
    fn()  # warm-up / JIT
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        n = 0
        while True:
            fn()
            n += 1
            dt = time.perf_counter() - t0
            if dt > 0.2:
                break
        best = min(best, dt / n)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--profile", choices=sorted(PROFILES), default="camera")
    args = parser.parse_args()
    p = PROFILES[args.profile]

    rng = np.random.default_rng(12345)
    mask = (rng.random(p["mask"]) < p["density"]).astype(np.uint8)
    n_disks = p["disks"]
    h, w = p["mask"]
    cx = rng.uniform(0, w, n_disks)
    cy = rng.uniform(0, h, n_disks)
    radius = rng.uniform(2, 8, n_disks)
    value = rng.integers(0, 256, n_disks)
    samples = (rng.random(p["samples"]) * 20000 - 10000).astype(np.float64)

    cases = {
        "connected_components": lambda b: kernels.connected_components(
            mask, min_area=4, backend=b),
        "render_disks": lambda b: kernels.render_disks(
            np.zeros(p["mask"], np.uint8), cx, cy, radius, value, backend=b),
        "tone_power": lambda b: kernels.tone_power(
            samples, 16000, 660.0, backend=b),
    }

    backends = list(kernels.IMPLEMENTATIONS)
    print(f"profile={args.profile}  mask={p['mask']}  "
          f"disks={n_disks}  samples={p['samples']}")
    print(f"{'kernel':<24}" + "".join(f"{b:>14}" for b in backends) +
          f"{'speedup':>10}")
    for name, fn in cases.items():
        times = {}
        for b in backends:
            times[b] = bench(lambda b=b: fn(b), args.repeats)
        row = f"{name:<24}" + "".join(
            f"{times[b] * 1e6:>12.1f}us" for b in backends)
        if "numba" in times and "numpy" in times:
            row += f"{times['numpy'] / times['numba']:>9.1f}x"
        print(row)
    if "numba" not in backends:
        print("numba backend unavailable (install catos[accel])")


if __name__ == "__main__":
    main()
