"""Benchmark the simplex pivot kernel: numba backend vs numpy fallback.

Builds the sum-rate LPs of representative constraint systems and runs the
same tableau through both pivot-loop implementations, checking that they
produce bit-identical results while timing them.

Usage: python benchmarks/bench_lp.py [--repeats N]
"""

import argparse
import time

import numpy as np

from rsbc._kernels import BACKEND, _build_numba_kernel, pivot_loop_numpy
from rsbc.channel import rayleigh
from rsbc.regions import constraints_lp, rs_constraints


def build_tableau(lp):
    c = lp.objective
    a = lp.constraint_matrix
    b = lp.rhs
    m, n = a.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = a
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = (n + np.arange(m)).astype(np.int64)
    return T, basis


def run(kernel, T, basis, m):
    T = T.copy()
    basis = basis.copy()
    start = time.perf_counter()
    status, nit = kernel(T, basis, m, 1e-10, 1_000_000)
    elapsed = time.perf_counter() - start
    assert status == 0
    return elapsed, nit, T, basis


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    try:
        numba_kernel = _build_numba_kernel()
    except ImportError:
        print("numba unavailable; nothing to compare")
        return

    cases = []
    for K, M, P in ((3, 3, 100.0), (4, 6, 100.0), (5, 6, 1000.0)):
        ch = rayleigh(K, M, seed=0)
        cons = rs_constraints(ch, P)
        lp, _ = constraints_lp(cons, {s: 1.0 for s in range(1, 1 << K)})
        cases.append((f"K={K} ({lp.num_constraints}x{lp.num_variables})", lp))

    print(f"active backend: {BACKEND}")
    print(f"{'case':<22} {'pivots':>7} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    for name, lp in cases:
        T, basis = build_tableau(lp)
        m = lp.num_constraints
        run(numba_kernel, T, basis, m)  # warm the JIT cache
        t_nb = min(run(numba_kernel, T, basis, m)[0] for _ in range(args.repeats))
        t_np = min(run(pivot_loop_numpy, T, basis, m)[0] for _ in range(args.repeats))
        _, nit, T1, b1 = run(numba_kernel, T, basis, m)
        _, _, T2, b2 = run(pivot_loop_numpy, T, basis, m)
        identical = np.array_equal(T1, T2) and np.array_equal(b1, b2)
        assert identical, "backends must produce bit-identical tableaus"
        print(f"{name:<22} {nit:>7} {t_nb * 1e3:>9.2f}ms {t_np * 1e3:>9.2f}ms "
              f"{t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
