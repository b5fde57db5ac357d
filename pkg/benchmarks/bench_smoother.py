#!/usr/bin/env python3
"""Benchmark the compiled smoothing kernel against the numpy fallback.

Workloads mirror what the semiparametric alternation actually runs: link
and variance smoothing of n scattered points evaluated on a fixed grid,
plus an end-to-end semiparametric fit. Run after building the extension:

    python benchmarks/bench_smoother.py
"""

import time

import numpy as np

from fglm import SimDesign, fourier_basis, generate_sample, project_scores, spqr_fit
from fglm import _locpoly_numpy
from fglm.smoothing import KERNELS, MAX_BANDWIDTH_DOUBLINGS

try:
    from fglm import _locpoly_fast

    BACKENDS = [("compiled", _locpoly_fast), ("numpy", _locpoly_numpy)]
except ImportError:
    _locpoly_fast = None
    BACKENDS = [("numpy", _locpoly_numpy)]


def time_call(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_kernels():
    rng = np.random.default_rng(0)
    print(f"{'workload':<38} " + " ".join(f"{name:>10}" for name, _ in BACKENDS)
          + ("   speedup" if len(BACKENDS) == 2 else ""))
    for n, k, degree, deriv in [
        (1000, 201, 1, 0),
        (1000, 201, 1, 1),
        (1000, 1000, 1, 0),
        (5000, 201, 1, 0),
        (5000, 201, 2, 0),
        (20000, 201, 1, 0),
    ]:
        x = rng.standard_normal(n)
        y = np.sin(x) + 0.3 * rng.standard_normal(n)
        at = np.linspace(x.min(), x.max(), k)
        h = 1.2 * x.std() * n ** (-0.2)
        times = []
        for _, backend in BACKENDS:
            times.append(
                time_call(
                    backend.locpoly, x, y, at, h, degree,
                    KERNELS["epanechnikov"], deriv, MAX_BANDWIDTH_DOUBLINGS,
                )
            )
        label = f"n={n} eval={k} degree={degree} deriv={deriv}"
        row = f"{label:<38} " + " ".join(f"{t * 1e3:9.2f}ms" for t in times)
        if len(times) == 2:
            row += f"   {times[1] / times[0]:7.1f}x"
        print(row)


def bench_semiparametric_fit():
    ds = generate_sample(SimDesign(n=2000, seed=1), rep=0)
    basis = fourier_basis(3, ds.grid)
    scores = project_scores(ds, basis, 3)
    start = time.perf_counter()
    fit, _ = spqr_fit(scores, ds.responses)
    elapsed = time.perf_counter() - start
    print(
        f"\nsemiparametric fit, n=2000 (active backend): "
        f"{elapsed:.2f}s in {fit.iterations} outer iterations"
    )


if __name__ == "__main__":
    if _locpoly_fast is None:
        print("compiled extension not available; timing the numpy fallback only\n")
    bench_kernels()
    bench_semiparametric_fit()
