#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Times the two hot paths on representative workloads:

* simplex pivoting, via a batch of adjustment LPs at several sizes, and
* per-row categorical sampling at prediction scale.

Run: python benchmarks/bench_backends.py [--quick]
The two backends produce bit-identical outputs; the script verifies that
on every workload before reporting timings.
"""

import argparse
import time

import numpy as np

from fairadjust import _kernels
from fairadjust.estimation import EmpiricalModel, build_v
from fairadjust.fairness_lp import CRITERIA, FairnessSpec, ObjectiveSpec, assemble
from fairadjust.lp_solver import solve
from fairadjust.rng import stream_uniforms


def random_model(rng, c, g):
    p_ya = rng.random((g, c)) + 0.1
    p_ya /= p_ya.sum()
    z = rng.random((g, c, c)) + 0.2 * c * np.eye(c)
    z /= z.sum(axis=1, keepdims=True)
    p_a = p_ya.sum(axis=1)
    return EmpiricalModel(p_a=p_a, p_ya=p_ya, z=z, v=build_v(z, p_ya),
                          p_yhat_given_a=np.einsum("akj,aj->ak", z, p_ya) / p_a[:, None],
                          n_cells=p_ya * 1000, n=1000)


def lp_batch(rng, c, g, count):
    lps = []
    for i in range(count):
        em = random_model(rng, c, g)
        crit = CRITERIA[i % len(CRITERIA)]
        eps = (0.0, 0.05, 0.2)[i % 3]
        lps.append(assemble(em, ObjectiveSpec("weighted"), FairnessSpec(crit, eps)))
    return lps


def use_backend(name):
    _kernels.simplex_iterate = getattr(_kernels, f"simplex_iterate_{name}")
    _kernels.sample_rows = getattr(_kernels, f"sample_rows_{name}")


def bench(fn, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()
    if not _kernels.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    scale = 0.25 if args.quick else 1.0
    rng = np.random.default_rng(0)
    workloads = []
    for c, g, count in ((3, 2, int(400 * scale)), (5, 2, int(150 * scale)),
                        (4, 3, int(150 * scale))):
        lps = lp_batch(rng, c, g, count)
        workloads.append((f"solve {count} LPs (C={c}, G={g}, n={g * c * c} vars)",
                          lambda lps=lps: [solve(lp).objective for lp in lps]))

    n_rows = int(2_000_000 * scale)
    g, c = 2, 3
    p = rng.random((g, c, c))
    p /= p.sum(axis=1, keepdims=True)
    cdf = np.ascontiguousarray(np.cumsum(p, axis=1))
    yhat = rng.integers(0, c, size=n_rows)
    grp = rng.integers(0, g, size=n_rows)
    u = stream_uniforms(7, np.arange(n_rows))
    workloads.append((f"sample {n_rows:,} adjusted predictions",
                      lambda: _kernels.sample_rows(cdf, yhat, grp, u)))

    use_backend("numba")        # trigger JIT outside the timed region
    for _, fn in workloads:
        fn()

    print(f"{'workload':48s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, fn in workloads:
        use_backend("numba")
        t_nb, out_nb = bench(fn)
        use_backend("numpy")
        t_np, out_np = bench(fn)
        same = np.array_equal(np.asarray(out_nb), np.asarray(out_np))
        flag = "" if same else "  OUTPUT MISMATCH"
        print(f"{name:48s} {t_nb * 1e3:8.1f}ms {t_np * 1e3:8.1f}ms "
              f"{t_np / t_nb:7.2f}x{flag}")


if __name__ == "__main__":
    main()
