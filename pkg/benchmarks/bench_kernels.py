#!/usr/bin/env python3
"""Benchmark the compiled convolution kernels against the NumPy fallback.

Times the three backend primitives on the shapes the sentence encoder
actually runs hottest: batches of 32x24 single-channel grids against the
40-filter 15x15 kernel, at both stride 1 and the stride-(9,4) preset.
Reports the median of `--repeats` timed runs after one warmup, and checks
that both backends produce identical results before timing anything.

Usage:  python3 benchmarks/bench_kernels.py [--repeats N] [--batch N]
"""

import argparse
import statistics
import time

import numpy as np

from chunkprobe._kernels import conv_numpy

try:
    from chunkprobe._kernels import conv_cython
except ImportError:                              # extension not built
    conv_cython = None


def build_cases(batch: int):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((batch, 1, 32, 24))
    w = rng.standard_normal((40, 1, 15, 15))
    gy = rng.standard_normal((batch, 40, 18, 10))
    gy94 = rng.standard_normal((batch, 40, 2, 3))
    return [
        (f"forward      {batch}x1x32x24 k15 s(1,1)",
         lambda m: m.conv2d_forward(x, w, 1, 1)),
        (f"forward      {batch}x1x32x24 k15 s(9,4)",
         lambda m: m.conv2d_forward(x, w, 9, 4)),
        (f"input_grad   {batch}x40x18x10 k15 s(1,1)",
         lambda m: m.conv2d_input_grad(gy, w, 1, 1, 32, 24)),
        (f"input_grad   {batch}x40x2x3   k15 s(9,4)",
         lambda m: m.conv2d_input_grad(gy94, w, 9, 4, 32, 24)),
        (f"weight_grad  {batch}x1x32x24 k15 s(1,1)",
         lambda m: m.conv2d_weight_grad(x, gy, 15, 15, 1, 1)),
        (f"weight_grad  {batch}x1x32x24 k15 s(9,4)",
         lambda m: m.conv2d_weight_grad(x, gy94, 15, 15, 9, 4)),
    ]


def median_ms(fn, repeats: int) -> float:
    fn()                                         # warmup
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append((time.perf_counter() - start) * 1e3)
    return statistics.median(times)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7,
                        help="timed runs per case (default 7)")
    parser.add_argument("--batch", type=int, default=100,
                        help="batch size for every case (default 100)")
    args = parser.parse_args()

    cases = build_cases(args.batch)
    if conv_cython is not None:
        for name, fn in cases:
            np.testing.assert_allclose(fn(conv_cython), fn(conv_numpy),
                                       rtol=1e-12, atol=1e-12,
                                       err_msg=f"backends disagree on {name}")

    header = f"{'case':<38} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, fn in cases:
        t_np = median_ms(lambda: fn(conv_numpy), args.repeats)
        if conv_cython is None:
            print(f"{name:<38} {t_np:>10.2f} {'n/a':>10} {'n/a':>8}")
            continue
        t_cy = median_ms(lambda: fn(conv_cython), args.repeats)
        print(f"{name:<38} {t_np:>10.2f} {t_cy:>10.2f} {t_np / t_cy:>7.2f}x")
    if conv_cython is None:
        print("\ncompiled backend unavailable; build the extension to compare")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
