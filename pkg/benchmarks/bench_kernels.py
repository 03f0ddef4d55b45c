"""Time the element kernels and a full Newton solve on both backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The kernel timings call the numba and numpy implementations directly in one
process. The solve timing runs a subprocess per backend because the backend
is fixed at import time by STXDIFF_DISABLE_NUMBA.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from stxdiff import kernels

SOLVE = """
import time
from stxdiff import problems as P
from stxdiff.solver import initial_guess, newton_solve
pr = P.heat_manufactured()
ctx = pr.context(pr.mesh(4, 4), 3)
newton_solve(ctx, initial_guess(ctx, 0.1))  # warm-up, includes JIT
ctx = pr.context(pr.mesh({n}, {n}), 3)
t = time.perf_counter()
newton_solve(ctx, initial_guess(ctx, 0.1))
print(time.perf_counter() - t)
"""


def kernel_data(ne, nq=16, nb=16, n=2, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.normal(size=(ne, nq, nb, 3)), rng.uniform(size=(ne, nq)),
            np.array([0, 2, 2]), np.array([0, 0, 2]), rng.normal(size=(ne, nq, 3, n, n)),
            rng.normal(size=(ne, nq, nb, 3)), rng.normal(size=(ne, nq, 3, n)))


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(repeat):
    rows = []
    for ne in (256, 1024, 4096):
        test, w, s, r, coeff, trial, flux = kernel_data(ne)
        cases = {
            "element_matrices": (lambda: kernels._element_matrices_nb(test, w, s, r, coeff, trial),
                                 lambda: kernels.element_matrices_numpy(test, w, s, r, coeff, trial)),
            "element_vectors": (lambda: kernels._element_vectors_nb(test, w, flux),
                                lambda: kernels.element_vectors_numpy(test, w, flux)),
        }
        for name, (nb_fn, np_fn) in cases.items():
            nb_fn()
            rows.append((name, ne, best(nb_fn, repeat), best(np_fn, repeat)))
    return rows


def bench_solve(n):
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, STXDIFF_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", SOLVE.format(n=n)], env=env,
                             capture_output=True, text=True, check=True)
        out[label] = float(res.stdout.split()[-1])
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--solve-n", type=int, default=16)
    args = ap.parse_args()
    print(f"{'kernel':<18}{'elements':>9}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>9}")
    for name, ne, t_nb, t_np in bench_kernels(args.repeat):
        print(f"{name:<18}{ne:>9}{1e3 * t_nb:>12.2f}{1e3 * t_np:>12.2f}{t_np / t_nb:>9.1f}")
    t = bench_solve(args.solve_n)
    print(f"\nheat solve p=3, {args.solve_n}x{args.solve_n}: numba {t['numba']:.2f} s, "
          f"numpy {t['numpy']:.2f} s, speedup {t['numpy'] / t['numba']:.1f}")


if __name__ == "__main__":
    main()
