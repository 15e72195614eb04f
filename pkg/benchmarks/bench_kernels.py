"""Benchmark the numba and pure-numpy kernel backends against each other.

Times the Riemannian CG minimizer and the SINR-cone projection on
solver-representative problem sizes.  Run from the repo root:

    python benchmarks/bench_kernels.py

Import selects the default backend from RISBF_PURE_NUMPY; this script
always times both (compiling the numba variant on first call).
"""

import time

import numpy as np

from risbf._kernels import available_backends


def bench_rcg(rcg, CH, tc, starts, reps):
    # warm-up triggers JIT compilation for the numba variant
    rcg(CH, tc, starts[0].copy(), 100, 1e-9, 1e-4, 0.5, 0.0, CH.shape[1])
    t0 = time.perf_counter()
    iters = 0
    for r in range(reps):
        b0 = starts[r % len(starts)]
        _, _, it, *_ = rcg(CH, tc, b0.copy(), 100, 1e-9, 1e-4, 0.5, 0.0, CH.shape[1])
        iters += it
    dt = time.perf_counter() - t0
    return dt, iters


def bench_cone(cone, rows, reps):
    cone(rows[0], 0, 2.0, 1.0, 200, 1e-12)
    t0 = time.perf_counter()
    for r in range(reps):
        cone(rows[r % len(rows)], 0, 2.0, 1.0, 200, 1e-12)
    return time.perf_counter() - t0


def main():
    rng = np.random.default_rng(0)
    backends = available_backends()
    print(f"backends available: {', '.join(backends)}")

    sizes = [(16, 9), (36, 9), (60, 9)]  # (L, terms): RIS/analog updates at desk scale
    reps = 2000
    for L, T in sizes:
        C = (rng.standard_normal((L, T)) + 1j * rng.standard_normal((L, T))) / np.sqrt(2)
        t = (rng.standard_normal(T) + 1j * rng.standard_normal(T)) / np.sqrt(2)
        CH = np.ascontiguousarray(C.conj().T)
        tc = np.conj(t)
        starts = [np.exp(1j * rng.uniform(0, 2 * np.pi, L)) for _ in range(32)]
        line = f"rcg L={L:3d} T={T}: "
        base = None
        for name, (rcg, _) in backends.items():
            dt, iters = bench_rcg(rcg, CH, tc, starts, reps)
            per_iter = dt / max(iters, 1) * 1e6
            if base is None:
                base = dt
            line += f"{name} {dt:7.3f}s ({per_iter:6.2f} us/iter, x{base / dt:5.1f})  "
        print(line)

    reps = 200_000
    rows = [rng.standard_normal(3) + 1j * rng.standard_normal(3) for _ in range(64)]
    rows = [np.ascontiguousarray(r) for r in rows]
    line = "cone projection K=3:  "
    base = None
    for name, (_, cone) in backends.items():
        dt = bench_cone(cone, rows, reps)
        if base is None:
            base = dt
        line += f"{name} {dt:7.3f}s ({dt / reps * 1e6:6.2f} us/call, x{base / dt:5.1f})  "
    print(line)


if __name__ == "__main__":
    main()
