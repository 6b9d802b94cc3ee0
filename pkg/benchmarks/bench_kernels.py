"""Benchmark the compiled kernel extension against the numpy fallback.

Runs each hot kernel at coverage-study sizes (n=3000 records, 2000-point
search grids, 15 groups) under both backends, checks that the outputs
agree, and prints per-call timings with the speedup ratio.

Usage:
    python benchmarks/bench_kernels.py [--repeats 200] [--n 3000]
"""

import argparse
import importlib
import time

import numpy as np

from shiftboot import _kernels_py

try:
    from shiftboot import _kernels
except ImportError:
    _kernels = None


def _time(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def make_cases(n, grid, n_groups, seed=0):
    rng = np.random.default_rng(seed)
    probs = np.clip(rng.beta(0.4, 0.6, n), 1e-6, 1 - 1e-6)
    odds = probs / (1.0 - probs)
    t = np.exp(np.linspace(np.log(1e-3), np.log(1e3), grid))
    x = rng.normal(1.0, 1.2, n)
    w = rng.random(n)
    gidx = rng.integers(0, n_groups, n).astype(np.int64)
    mu1 = 3.0 + rng.normal(0.0, 0.7, n_groups)[gidx]
    mu0 = rng.normal(0.0, 0.7, n_groups)[gidx]
    mix = np.clip(rng.random(n), 0.05, 0.95)
    cases = {
        "fixed_point_curve": (odds, t),
        "weighted_group_moments": (x, w, gidx, n_groups),
        "em_accumulate": (x, mu1, mu0, 0.9, 1.1,
                          np.log(mix), np.log1p(-mix), gidx, n_groups),
    }
    return cases


def check_agreement(name, args):
    res_py = getattr(_kernels_py, name)(*args)
    res_c = getattr(_kernels, name)(*args)
    if not isinstance(res_py, tuple):
        res_py, res_c = (res_py,), (res_c,)
    for a, b in zip(res_py, res_c):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=200,
                        help="timing repeats per kernel (best-of)")
    parser.add_argument("--n", type=int, default=3000,
                        help="number of records")
    parser.add_argument("--grid", type=int, default=2000,
                        help="fixed-point search grid size")
    parser.add_argument("--groups", type=int, default=15,
                        help="number of groups")
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not built; showing the numpy backend only")
    cases = make_cases(args.n, args.grid, args.groups)

    header = f"{'kernel':26s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, call_args in cases.items():
        t_py = _time(getattr(_kernels_py, name), call_args, args.repeats)
        if _kernels is None:
            print(f"{name:26s} {t_py * 1e3:9.3f}ms {'-':>10s} {'-':>8s}")
            continue
        check_agreement(name, call_args)
        t_c = _time(getattr(_kernels, name), call_args, args.repeats)
        print(f"{name:26s} {t_py * 1e3:9.3f}ms {t_c * 1e3:9.3f}ms "
              f"{t_py / t_c:7.1f}x")

    active = importlib.import_module("shiftboot.kernels").BACKEND
    print(f"\nactive backend for this interpreter: {active}")


if __name__ == "__main__":
    main()
