"""Compiled vs pure-Python stepping loop.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--steps 4000]

Prints wall time of a full ``integrate`` call per backend (coefficient
construction included) and the speedup for each built-in problem and method
order. Both backends must agree to 1e-12 relative or the run aborts.
"""
import argparse
import sys
import time

import numpy as np

from vssdimsim import _backend
from vssdimsim.grids import pattern_grid
from vssdimsim.integrator import integrate
from vssdimsim.problems import get_problem


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=4000,
                    help="steps for the 2-D problems; the stiffer PDE uses 3x as many")
    ap.add_argument("--orders", default="1,2,3,4")
    args = ap.parse_args(argv)
    if not _backend.HAVE_COMPILED:
        print("compiled kernel not available; build it with "
              "'python3 setup.py build_ext --inplace'", file=sys.stderr)
        return 1
    orders = [int(p) for p in args.orders.split(",")]
    print(f"{'problem':10s} {'p':>2s} {'N':>6s} {'compiled s':>11s} {'python s':>9s} {'speedup':>8s}")
    for name in ("linear", "bruss", "bruss-pde"):
        P = get_problem(name)
        N = 3 * args.steps if name == "bruss-pde" else args.steps
        grid = pattern_grid(P.x0, P.X, N, 2)
        for p in orders:
            # starting values come from the memoized reference, so warm it first
            integrate(P, grid, p, backend="python")
            tc, rc = best_of(lambda: integrate(P, grid, p, backend="compiled"), args.repeat)
            tp, rp = best_of(lambda: integrate(P, grid, p, backend="python"), args.repeat)
            scale = max(1.0, float(np.abs(rp.y_final).max()))
            if np.abs(rc.y_final - rp.y_final).max() > 1e-12 * scale:
                print(f"backends disagree on {name} p={p}", file=sys.stderr)
                return 1
            print(f"{name:10s} {p:2d} {N:6d} {tc:11.4f} {tp:9.4f} {tp / tc:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
