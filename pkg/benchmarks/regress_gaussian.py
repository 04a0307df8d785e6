"""Non-gating regression runs for Gaussian-weight rules of degree 13 to 17.

    python benchmarks/regress_gaussian.py [--degrees 13 15 17] [--seed 0] [--iters 50000]

Targets are the node counts 35, 46 and 57.  Convergence at these sizes is
slow and poorly conditioned, so a failure here is reported, not raised.
"""
import argparse
import time

from commext.cubature import SearchFailed, search_rule, verify_rule
from commext.moments import WeightedDomain

TARGETS = {11: 26, 13: 35, 15: 46, 17: 57}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--degrees", type=int, nargs="+", default=[13, 15, 17])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--multistarts", type=int, default=8)
    ap.add_argument("--iters", type=int, default=50000)
    ap.add_argument("--sweeps", type=int, default=2000)
    args = ap.parse_args()
    dom = WeightedDomain("gaussian_plane")
    for deg in args.degrees:
        if deg not in TARGETS:
            ap.error(f"no target node count for degree {deg}")
        q, N = (deg - 1) // 2, TARGETS[deg]
        t0 = time.perf_counter()
        try:
            rule = search_rule(dom, q, N, seed=args.seed, multistarts=args.multistarts,
                               max_iters=args.iters, max_sweeps=args.sweeps, method="gradient_flow")
        except SearchFailed as exc:
            best = min((s["objective"] for s in exc.diagnostics["methods"].get("gradient_flow", {})
                        .get("starts", [])), default=float("nan"))
            print(f"degree {deg}, N={N}: failed after {time.perf_counter() - t0:.0f} s "
                  f"({exc.reason}; best squared commutator norm {best:.2e})")
            continue
        rep = verify_rule(rule)
        print(f"degree {deg}, N={N}: {rule.size} nodes, max moment error {rep.max_error:.2e}, "
              f"min weight {rule.weights.min():.2e}, {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
