"""Compare the compiled and NumPy kernel backends.

Times per-bond response plus force and block scatter on cubic lattices of
increasing size, then a full Newton solve of each lattice with both backends.

    python3 benchmarks/bench_kernels.py [--sizes 4 8 12] [--repeat 5]
"""
import argparse
import time

import numpy as np

from bondnet import assemble_state, kernels, solve
from bondnet.scenario import grid


def lattice(n):
    sc = grid(n, n, n)
    prob, _ = sc.to_problem()
    rng = np.random.default_rng(0)
    x = prob.reference_free_positions() + 0.01 * rng.standard_normal((prob.p, 3))
    return prob, x


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 8, 12, 16])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = kernels.available_backends()
    initial = kernels.BACKEND
    print(f"backends: {', '.join(sorted(backends))}")
    print(f"{'lattice':>9} {'bonds':>7} " + " ".join(f"{b + ' [ms]':>14}" for b in sorted(backends))
          + (f" {'speedup':>8}" if len(backends) > 1 else ""))
    for n in args.sizes:
        prob, x = lattice(n)
        row = {}
        for name in sorted(backends):
            kernels.use_backend(name)
            row[name] = best_of(lambda: assemble_state(prob, x, tangent=True), args.repeat)
        line = f"{f'{n}^3':>9} {prob.net.m:>7} " + " ".join(
            f"{1e3 * row[b]:>14.3f}" for b in sorted(row))
        if len(row) > 1:
            line += f" {row['numpy'] / row['cython']:>8.1f}x"
        print(line)

    print("\nfull solve of the loaded lattice")
    for n in args.sizes:
        prob, _ = lattice(n)
        for name in sorted(backends):
            kernels.use_backend(name)
            t0 = time.perf_counter()
            rep = solve(prob)
            dt = time.perf_counter() - t0
            print(f"{f'{n}^3':>9} {name:>7}: {dt:8.3f} s, {rep.iterations} iterations, "
                  f"{rep.status.value}")
    kernels.use_backend(initial)


if __name__ == "__main__":
    main()
