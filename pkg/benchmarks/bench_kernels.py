#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the hot operations (conv2d forward/backward, max pooling) on the
shapes the desk benchmark actually runs: batch-32 training steps of the
plain model plus the single-image shape the attack loop hammers.

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from perturbench import kernels


def cases():
    rng = np.random.default_rng(0)

    def conv_case(name, n, c, k, hw, ksize, pad):
        x = rng.random((n, c, hw, hw))
        w = rng.random((k, c, ksize, ksize)) - 0.5
        ho = hw + 2 * pad - ksize + 1
        gy = rng.random((n, k, ho, ho))
        return name, x, w, gy, pad

    yield conv_case("conv1 train batch (32x3x32x32 -> 16ch)", 32, 3, 16, 32, 3, 1)
    yield conv_case("conv2 train batch (32x16x16x16 -> 32ch)", 32, 16, 32, 16, 3, 1)
    yield conv_case("conv2 attack image (1x16x16x16 -> 32ch)", 1, 16, 32, 16, 3, 1)


def time_op(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats (best-of)")
    args = parser.parse_args()

    backends = {name: kernels.get_backend(name) for name in kernels.available_backends()}
    print(f"backends present: {', '.join(backends)} (active default: {kernels.BACKEND})")
    if len(backends) == 1:
        print("compiled extension not built; timing the numpy fallback only")

    rows = []
    for name, x, w, gy, pad in cases():
        h = x.shape[2]
        for op, make in (
            ("forward", lambda b: lambda: b.conv2d_forward(x, w, 1, pad)),
            ("grad_input", lambda b: lambda: b.conv2d_grad_input(gy, w, h, h, 1, pad)),
            ("grad_kernel", lambda b: lambda: b.conv2d_grad_kernel(gy, x, w.shape[2], w.shape[3], 1, pad)),
        ):
            timings = {bname: time_op(make(b), args.repeats) for bname, b in backends.items()}
            rows.append((f"{name} {op}", timings))

    rng = np.random.default_rng(1)
    xp = rng.random((32, 16, 32, 32))
    _, idx = backends[next(iter(backends))].maxpool_forward(xp, 2, 2)
    gyp = rng.random((32, 16, 16, 16))
    rows.append(
        (
            "maxpool fwd (32x16x32x32, 2x2)",
            {n: time_op(lambda b=b: b.maxpool_forward(xp, 2, 2), args.repeats) for n, b in backends.items()},
        )
    )
    rows.append(
        (
            "maxpool grad (32x16x32x32, 2x2)",
            {n: time_op(lambda b=b: b.maxpool_grad(gyp, idx, 32, 32), args.repeats) for n, b in backends.items()},
        )
    )

    name_w = max(len(r[0]) for r in rows)
    header = f"{'operation':<{name_w}}"
    for bname in backends:
        header += f"  {bname + ' (ms)':>12}"
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, timings in rows:
        line = f"{name:<{name_w}}"
        for bname in backends:
            line += f"  {timings[bname] * 1e3:>12.3f}"
        if len(backends) == 2:
            line += f"  {timings['numpy'] / timings['cython']:>7.2f}x"
        print(line)


if __name__ == "__main__":
    main()
