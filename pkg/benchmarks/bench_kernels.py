#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-NumPy fallback.

The hot path of a grid run is rasterization and bicubic resize of
full-resolution radiographs, so those are what get timed. Run:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

import vpeval._kernels.numpy_backend as numpy_k

try:
    import vpeval._kernels._core as cython_k
except ImportError:
    cython_k = None


def _time(fn, *args, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    rng = np.random.default_rng(42)
    big = rng.random((2048, 2048, 3)).astype(np.float32)
    grid = rng.random((14, 14)).astype(np.float32)
    segs = np.ascontiguousarray(rng.random((64, 4)) * 2048.0)

    cases = [
        ("resize 2048x2048 -> 224", "resize_bicubic", (big, 224, 224)),
        ("ring on 2048x2048", "paint_ring",
         (big.copy(), 1024.0, 1024.0, 400.0, 4.0, 1.0, 0.0, 0.0)),
        ("64 segments on 2048x2048", "paint_segments",
         (big.copy(), segs, 4.0, 1.0, 0.0, 0.0)),
        ("triangle on 2048x2048", "paint_triangle",
         (big.copy(), 400.0, 900.0, 700.0, 1100.0, 500.0, 1400.0, 1.0, 0.0, 0.0)),
        ("upsample 14x14 -> 2048", "upsample_bilinear", (grid, 2048, 2048)),
    ]

    header = f"{'case':<28}{'numpy':>12}{'cython':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, name, args in cases:
        t_np = _time(getattr(numpy_k, name), *args)
        if cython_k is None:
            print(f"{label:<28}{t_np * 1e3:>10.2f}ms{'n/a':>12}{'':>10}")
            continue
        t_cy = _time(getattr(cython_k, name), *args)
        print(f"{label:<28}{t_np * 1e3:>10.2f}ms{t_cy * 1e3:>10.2f}ms"
              f"{t_np / t_cy:>9.1f}x")
    if cython_k is None:
        print("\ncompiled kernels not built; showing fallback timings only")


if __name__ == "__main__":
    main()
