"""Time the numba and numpy backends of the CSR kernels on the same inputs.

Usage: python benchmarks/bench_kernels.py [--nodes N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from deepgraph import _accel
from deepgraph.datasets import erdos_renyi, two_circles
from deepgraph.graph import diameter_largest_component, normalize
from deepgraph.kernels import hamming_block, spmm


def _best(fn, repeat):
    fn()  # warm-up, includes jit compilation
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def cases(nodes, hidden):
    circles = two_circles(num_points=nodes, threshold=0.2, seed=0)
    adj = normalize(circles)
    h = np.random.default_rng(0).normal(size=(nodes, hidden))
    er = erdos_renyi(nodes, 8.0 / nodes, seed=0)
    rows = np.arange(min(nodes, 100))
    return {
        "spmm": lambda: spmm(adj.indptr, adj.indices, adj.data, h),
        "diameter": lambda: diameter_largest_component(er),
        "hamming": lambda: hamming_block(er.indptr, er.indices, rows, rows),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, default=2000)
    parser.add_argument("--hidden", type=int, default=50)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    previous = _accel.USE_NUMBA
    results = {}
    for use_numba in (False, True):
        _accel.set_backend(use_numba)
        for name, fn in cases(args.nodes, args.hidden).items():
            results[name, use_numba] = _best(fn, args.repeat)
    _accel.set_backend(previous)

    print(f"{'kernel':10s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name in ("spmm", "diameter", "hamming"):
        slow, fast = results[name, False], results[name, True]
        print(f"{name:10s} {slow * 1e3:10.2f} {fast * 1e3:10.2f} {slow / fast:8.1f}x")
    return results


if __name__ == "__main__":
    main()
