#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against their pure-numpy twins.

Runs the FFT (power-of-two and Bluestein lengths) and the direct 1-D
convolution on row batches shaped like real workloads: rows = b * k * h for a
batch of sentences, columns = sequence length.  Select a single backend with
STGNN_NUMBA=0/1, or let the script time both.

Usage: python benchmarks/bench_kernels.py [--repeats 20]
"""

import argparse
import time

import numpy as np

from stgnn import kernels

CASES = [
    ("fft pow2   (1536 x 64)", "fft", (1536, 64)),
    ("fft bluestein (1536 x 85)", "fft", (1536, 85)),
    ("fft pow2   (96 x 16)", "fft", (96, 16)),
    ("conv1d k=3 (1536 x 85)", "conv", (1536, 85)),
    ("conv1d k=3 (96 x 16)", "conv", (96, 16)),
]


def run_case(kind, shape, rng):
    if kind == "fft":
        x = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        return lambda: kernels.fft_rows(x, -1)
    x = rng.normal(size=shape)
    k = rng.normal(size=3)
    return lambda: kernels.conv1d_rows(x, k)


def time_fn(fn, repeats):
    fn()  # warm-up (JIT compile on the numba path)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}\n")
    header = f"{'case':<28}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)

    for label, kind, shape in CASES:
        times = {}
        for backend in backends:
            kernels.set_backend(backend)
            times[backend] = time_fn(run_case(kind, shape, rng), args.repeats)
        row = f"{label:<28}" + "".join(
            f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) == 2:
            row += f"{times['numpy'] / times['numba']:>9.1f}x"
        print(row)

    kernels.set_backend(kernels._default_backend())


if __name__ == "__main__":
    main()
