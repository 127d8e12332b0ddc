"""Compare the numba and pure-numpy kernel implementations.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 400]

Each kernel is warmed up once (JIT compilation) and then timed; the best of
``--repeat`` runs is reported along with the largest disagreement between the
two implementations.  The last rows time a whole AMD solve with each softmax
backend swapped in.
"""

import argparse
import time

import numpy as np

from rdd import kernels
from rdd.distortion import dmax_quadratic
from rdd.solver import SolverConfig, solve
from rdd.spaces import SourceFamily, build_uniform_grid, source_pmf


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def gap(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--size", type=int, default=400, help="rows/cols of the softmax input")
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    logits = rng.normal(scale=30, size=(args.size, args.size))
    m = 14
    dx = rng.uniform(size=(m, m))
    dx = (dx + dx.T) / 2
    np.fill_diagonal(dx, 0)
    w = rng.exponential(size=(m, m))
    w /= w.sum(axis=1, keepdims=True)
    p = rng.exponential(size=m)
    p /= p.sum()

    g = build_uniform_grid(8, 50, 1)
    src = source_pmf(g, SourceFamily("gaussian", 2.0))
    _, Q = dmax_quadratic(g.dist_q, g.dist_q, src.pmf)
    r0 = np.full(50, 1 / 50)
    step = 1 / (2 * np.abs(Q).max())

    cases = [
        (f"row_softmax {args.size}x{args.size}", kernels.nb_row_softmax, kernels.np_row_softmax, (logits,)),
        (f"gromov_quartic M=N={m}", kernels.nb_gromov_quartic, kernels.np_gromov_quartic, (dx, dx, w, p)),
        ("simplex_md N=50, 2000 steps", kernels.nb_simplex_md, kernels.np_simplex_md, (Q, r0, step, 2000)),
        ("simplex_pairwise N=50", kernels.nb_simplex_pairwise, kernels.np_simplex_pairwise, (Q, r0, 1e-12, 11000)),
    ]

    print(f"{'kernel':34s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s} {'max gap':>9s}")
    for name, nb, npf, fargs in cases:
        t_nb = best_of(lambda: nb(*fargs), args.repeat)
        t_np = best_of(lambda: npf(*fargs), args.repeat)
        print(f"{name:34s} {t_nb * 1e3:11.3f} {t_np * 1e3:11.3f} {t_np / t_nb:8.1f} {gap(nb(*fargs), npf(*fargs)):9.1e}")

    cfg = SolverConfig(lam=0.02, max_iter=100)
    timings = {}
    for label, fn in (("numba", kernels.nb_row_softmax), ("numpy", kernels.np_row_softmax)):
        original = kernels.row_softmax
        kernels.row_softmax = fn
        try:
            timings[label] = best_of(lambda: solve(src, g, cfg), args.repeat)
        finally:
            kernels.row_softmax = original
    print(f"{'AMD solve K=50, 100 iterations':34s} {timings['numba'] * 1e3:11.3f} {timings['numpy'] * 1e3:11.3f} "
          f"{timings['numpy'] / timings['numba']:8.1f} {'':>9s}")
    print(f"dispatch backend in this process: {kernels.BACKEND} (set RDD_USE_NUMBA=0 for numpy)")


if __name__ == "__main__":
    main()
