"""Time the numba kernels against the pure-numpy fallback.

Run: python benchmarks/bench_kernels.py [--particles N] [--repeat R]

Both backends are imported directly, so the CLSCHROD_NUMBA flag does not
matter here. The first numba call (compilation) is excluded from timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from clschrod.kernels import numpy_impl

try:
    from clschrod.kernels import numba_impl
except ImportError:
    numba_impl = None


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(particles, rng):
    n, K = 1024, 40
    vel1 = np.ascontiguousarray(np.sin(np.linspace(0, 6, n))[None] * np.linspace(1, 2, K)[:, None])
    nodes1 = np.zeros((K, n), dtype=bool)
    times = np.linspace(0.0, 1.0, K)
    x1 = rng.uniform(-5, 5, particles)
    alive1 = np.ones(particles, dtype=bool)

    m = 128
    X, Y = np.meshgrid(np.linspace(-1, 1, m), np.linspace(-1, 1, m), indexing="ij")
    vel2 = np.ascontiguousarray(np.stack([np.stack([-Y, X])] * K))
    nodes2 = np.zeros((K, m, m), dtype=bool)
    x2 = rng.uniform(-4, 4, (particles // 4, 2))
    alive2 = np.ones(particles // 4, dtype=bool)

    phase = np.angle(np.exp(1j * np.cumsum(rng.normal(0, 0.5, 1 << 16))))
    valid = np.ones(phase.size, dtype=bool)

    return {
        "unwrap_line (65536 samples)":
            lambda impl: impl.unwrap_line(phase, valid, phase.size // 2, float(phase[0])),
        f"advance_1d ({particles} particles, {K} snapshots)":
            lambda impl: impl.advance_1d(x1, alive1, times, vel1, nodes1, -10.24, 0.02, True,
                                         0.005),
        f"advance_2d ({particles // 4} particles, {K} snapshots)":
            lambda impl: impl.advance_2d(x2, alive2, times, vel2, nodes2, np.array([-6.4, -6.4]),
                                         np.array([0.1, 0.1]), True, 0.005),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--particles", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if numba_impl is None:
        print("numba is not available; nothing to compare")
        return 1
    cases = _cases(args.particles, np.random.default_rng(0))
    print(f"{'kernel':<44s}{'numpy [s]':>12s}{'numba [s]':>12s}{'speedup':>10s}")
    for name, call in cases.items():
        call(numba_impl)  # compile
        a = _best(lambda: call(numpy_impl), args.repeat)
        b = _best(lambda: call(numba_impl), args.repeat)
        print(f"{name:<44s}{a:12.4f}{b:12.4f}{a / b:10.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
