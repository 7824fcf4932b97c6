#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times the three hot kernels (pair-coupled path recursion, drift
convolution with record, weight terms) on one realistic Monte Carlo
workload and prints per-backend throughput plus the speedup.  Also
cross-checks that the two backends agree numerically.

Run: python3 scripts/benchmark_backends.py [--samples 4096] [--modes 8] [--steps 256]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mild_girsanov import engine
from mild_girsanov._kernels import compiled, numpy_impl
from mild_girsanov.spectral import squares_operator
from mild_girsanov.streams import Role, normal_block


def bench(impl, name, spec, coeff, z1, z2, semx, repeats=3):
    count, d, n_steps = z1.shape
    h = np.empty((count, d, n_steps + 1))
    db = np.empty((count, d, n_steps))
    gam = np.empty_like(h)
    f = np.empty_like(db)
    cm = np.empty(count)
    ito = np.empty(count)
    h0 = np.zeros((count, d))

    best = {}
    for label, fn in (
        ("ou_paths", lambda: impl.ou_paths(
            coeff.decay, coeff.scale, coeff.cov_q, coeff.cond_sd, coeff.sqrt_dt,
            z1, z2, h0, h, db)),
        ("gamma_paths", lambda: impl.gamma_paths(
            coeff.decay, coeff.phi1dt, numpy_impl.KIND_TANH, 0.5, 1.0, semx, h, gam, f)),
        ("weight_terms", lambda: impl.weight_terms(f, db, coeff.w_eps, coeff.dt, cm, ito)),
    ):
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        best[label] = min(times)
    total = sum(best.values())
    print(f"{name:>8}: " + "  ".join(f"{k} {v*1e3:8.2f} ms" for k, v in best.items())
          + f"  | total {total*1e3:8.2f} ms")
    return total, h.copy(), db.copy(), gam.copy(), cm.copy(), ito.copy()


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--samples", type=int, default=4096)
    parser.add_argument("--modes", type=int, default=8)
    parser.add_argument("--steps", type=int, default=256)
    args = parser.parse_args()

    spec = squares_operator(args.modes)
    coeff = engine.step_coefficients(spec, 1.0 / args.steps)
    n = 2 * args.modes * args.steps
    z = normal_block(1234, Role.GENERIC, n, 0, args.samples)
    z1 = np.ascontiguousarray(z[:, : args.modes * args.steps].reshape(args.samples, args.modes, args.steps))
    z2 = np.ascontiguousarray(z[:, args.modes * args.steps :].reshape(args.samples, args.modes, args.steps))
    semx = np.zeros((args.modes, args.steps))

    print(f"workload: {args.samples} samples x {args.modes} modes x {args.steps} steps")
    t_np, h1, db1, g1, cm1, i1 = bench(numpy_impl, "numpy", spec, coeff, z1, z2, semx)
    if compiled is None:
        print("compiled extension not built; nothing to compare")
        return
    t_c, h2, db2, g2, cm2, i2 = bench(compiled, "c", spec, coeff, z1, z2, semx)

    agree = max(
        float(np.abs(h1 - h2).max()),
        float(np.abs(db1 - db2).max()),
        float(np.abs(g1 - g2).max()),
        float(np.abs(cm1 - cm2).max()),
        float(np.abs(i1 - i2).max()),
    )
    print(f"cross-backend max abs difference: {agree:.3e}")
    print(f"speedup (numpy / c): {t_np / t_c:.2f}x")


if __name__ == "__main__":
    main()
