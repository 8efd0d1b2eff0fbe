"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

For each kernel both backends run on the same input; the script prints the
best-of-``repeat`` wall time of each, the speedup, and whether the outputs
agree.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from graphclust import _fallback
from graphclust._backend import BACKEND
from graphclust.sbm import planted_partition

try:
    from graphclust import _kernels
except ImportError:
    _kernels = None


def _best_time(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _eigen_case(n: int):
    rng = np.random.default_rng(0)
    a = rng.normal(size=(n, n))
    a = (a + a.T) / 2

    def run(mod):
        def go():
            d, e, q = mod.tridiagonalize(a.copy())
            zt = np.ascontiguousarray(q.T)
            mod.tridiagonal_ql(d, e, zt)
            return np.sort(d)

        return go

    return f"tridiagonalize+QL n={n}", run, lambda x, y: np.allclose(x, y, atol=1e-8)


def _assignment_case(n: int):
    cost = np.random.default_rng(1).random((n, n))

    def run(mod):
        return lambda: float(cost[np.arange(n), mod.linear_assignment(cost.copy())].sum())

    return f"linear_assignment n={n}", run, lambda x, y: abs(x - y) < 1e-9


def _mh_case(iters: int):
    g, _ = planted_partition([100, 100], 0.1, 0.01, seed=0)
    n, K = g.num_nodes, 2
    rng = np.random.default_rng(2)
    z0 = rng.integers(K, size=n).astype(np.int64)
    nodes = rng.integers(n, size=iters).astype(np.int64)
    offsets = rng.integers(1, K, size=iters).astype(np.int64)
    uniforms = rng.random(iters)
    indptr = g.indptr.astype(np.int64)
    indices = g.indices.astype(np.int64)

    def run(mod):
        def go():
            z = z0.copy()
            samples = np.zeros((iters // 2, n), dtype=np.int16)
            trace = np.zeros(iters)
            occ = np.zeros(iters, dtype=np.int32)
            best = z.copy()
            acc, _ = mod.mh_chain(
                indptr, indices, z, K, 0, np.ones(K), 1.0, 1.0, nodes, offsets, uniforms,
                0.0, iters // 2, 1, samples, trace, occ, best,
            )
            return acc, z

        return go

    return f"mh_chain iters={iters}", run, lambda x, y: x[0] == y[0] and np.array_equal(x[1], y[1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; only the fallback is available", file=sys.stderr)
        return 1
    print(f"active backend: {BACKEND}")
    scale = 0.5 if args.quick else 1.0
    cases = [
        _eigen_case(int(200 * scale)),
        _assignment_case(int(100 * scale)),
        _mh_case(int(20000 * scale)),
    ]
    header = f"{'kernel':32s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}  agree"
    print(header)
    print("-" * len(header))
    ok = True
    for name, run, same in cases:
        tc, oc = _best_time(run(_kernels), args.repeat)
        tp, op = _best_time(run(_fallback), args.repeat)
        agree = bool(same(oc, op))
        ok &= agree
        print(f"{name:32s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}  {'yes' if agree else 'NO'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
