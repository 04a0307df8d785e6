"""Time the compiled rotation kernel against the numpy reference.

    python benchmarks/bench_kernels.py [--repeat 5]

Each case times a full minimization along one rotation (scan plus golden
section) and a complete sweep over all row pairs of the factored search.
"""
import argparse
import statistics
import time

import numpy as np

from commext import _kernels_py
from commext.extensions import random_orthogonal
from commext.moments import WeightedDomain, coordinate_matrices, gram_schmidt_basis

try:
    from commext import _kernels
except ImportError:
    _kernels = None

CASES = [("square", 2, 7), ("gaussian_plane", 3, 13), ("gaussian_plane", 5, 26)]


def _problem(kind, q, N):
    dom = WeightedDomain(kind)
    basis = gram_schmidt_basis(dom, q)
    arrs = np.ascontiguousarray(np.array(coordinate_matrices(dom, basis).arrays()))
    Qt = random_orthogonal(N, np.random.default_rng(0))
    return arrs, Qt, basis.n, basis.dim_lower


def _time(fn, repeat):
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def _sweep(cls, arrs, Qt, n, m):
    for p in range(n):
        for r in range(p + 1, Qt.shape[0]):
            cls(Qt, arrs, n, m, p, r).minimize()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [("python", _kernels_py.RotationObjective)]
    if _kernels is not None:
        backends.append(("cython", _kernels.RotationObjective))
    else:
        print("compiled kernel not built; timing the numpy reference only")

    print(f"{'case':<24}{'backend':<9}{'one rotation [s]':>18}{'one sweep [s]':>15}")
    for kind, q, N in CASES:
        arrs, Qt, n, m = _problem(kind, q, N)
        base = None
        for name, cls in backends:
            one = _time(lambda: cls(Qt, arrs, n, m, 0, N - 1).minimize(), args.repeat)
            sweep = _time(lambda: _sweep(cls, arrs, Qt, n, m), max(1, args.repeat // 2))
            ratio = "" if base is None else f"   x{base / sweep:.1f}"
            base = base or sweep
            print(f"{f'{kind} q={q} N={N}':<24}{name:<9}{one:>18.2e}{sweep:>15.2e}{ratio}")


if __name__ == "__main__":
    main()
