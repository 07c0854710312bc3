"""Timing of the compiled kernels against the numpy fallback.

    python benchmarks/bench_core.py [--repeat N] [--nodes 64 128 256]

Each kernel is run on identical inputs under both backends; the table shows
the best-of-N time per call, the speedup and the largest difference between
the two results.
"""
import argparse
import timeit

import numpy as np

from bcsgap import backend
from bcsgap.model import EnergyGrid, PhysicalParams, SeparableKernel

PARAMS = PhysicalParams(epsilon=0.01, hbar_omega_d=1.0, mu=10.0, n0=1.0)
T = 0.05


def cases(n):
    grid = EnergyGrid.gauss_legendre(PARAMS, n, "log")
    kmat = SeparableKernel(0.4, (0.1,), PARAMS.domain).matrix(grid.nodes)
    u = 0.15 + 0.02 * np.cos(grid.nodes)
    eta = np.logspace(-4, 2, 4096)
    return {
        "nystrom_apply": lambda m: m.nystrom_apply(kmat, grid.weights, grid.nodes, u, T),
        "nystrom_system": lambda m: m.nystrom_system(kmat, grid.weights, grid.nodes, u, T)[1],
        "gap_integral": lambda m: np.array([m.gap_integral(T, 0.1, 0.01, 1.0, 1e-13)]),
        "g_function": lambda m: m.g_function(eta),
    }


def best(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--nodes", type=int, nargs="+", default=[64, 128, 256])
    args = parser.parse_args()

    if "cython" not in backend.available():
        print("compiled backend not built; only the numpy fallback is available")
        return
    py, cy = backend.get("python"), backend.get("cython")
    print(f"{'kernel':<16}{'nodes':>6}{'python [us]':>14}{'cython [us]':>14}{'speedup':>10}{'max diff':>12}")
    for n in args.nodes:
        for name, fn in cases(n).items():
            if name in ("gap_integral", "g_function") and n != args.nodes[0]:
                continue
            diff = float(np.max(np.abs(np.asarray(fn(py)) - np.asarray(fn(cy)))))
            t_py = best(lambda: fn(py), args.repeat)
            t_cy = best(lambda: fn(cy), args.repeat)
            print(f"{name:<16}{n:>6}{t_py * 1e6:>14.1f}{t_cy * 1e6:>14.1f}{t_py / t_cy:>10.2f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
