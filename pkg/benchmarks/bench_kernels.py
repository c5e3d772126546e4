"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py --runs 2000000 --repeat 3
"""

import argparse
import time

import numpy as np

from tempbell import kernels
from tempbell.geometry import reference_config_18
from tempbell.lhv import RealityDistribution
from tempbell.quantum import QubitState, branch_tables


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--runs", type=int, default=2_000_000)
    p.add_argument("--grid-deg", type=float, default=2.0)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    rng = np.random.default_rng(0)
    u = rng.random((args.runs, 3))
    cdf = kernels.reality_cdf(RealityDistribution.uniform().weights)
    tables = branch_tables(QubitState((0.6, 0.0, 0.8)), reference_config_18())
    first, second = kernels.decode_pairs(u[:, 0])
    polar = np.deg2rad(np.arange(0.0, 180.0 + 1e-9, args.grid_deg))
    azimuth = np.deg2rad(np.arange(0.0, 360.0 - 1e-9, args.grid_deg))

    cases = {
        "lhv_runs": lambda nb: kernels.lhv_runs(u[:, 0], u[:, 1], cdf, use_numba=nb),
        "qubit_runs": lambda nb: kernels.qubit_runs(first, second, u[:, 1], u[:, 2], *tables, use_numba=nb),
        "grid_scan": lambda nb: kernels.grid_scan(kernels.OBJ_INEQ18, polar, polar, azimuth, use_numba=nb),
    }
    modes = [False, True] if kernels.HAVE_NUMBA else [False]
    print(f"{'kernel':<12} {'numpy s':>10} {'numba s':>10} {'speedup':>8}")
    for name, fn in cases.items():
        res = {}
        for nb in modes:
            fn(nb)  # warm-up, includes jit compile
            res[nb] = best_of(lambda: fn(nb), args.repeat)
        if True in res:
            print(f"{name:<12} {res[False]:>10.4f} {res[True]:>10.4f} {res[False] / res[True]:>7.1f}x")
        else:
            print(f"{name:<12} {res[False]:>10.4f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
