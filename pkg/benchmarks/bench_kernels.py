"""Numba kernels against the numpy fallback.

Per-kernel timings use the ``impl=`` override in one process.  The end-to-end
solve runs twice in subprocesses with ``MAXREG_BACKEND`` set, since the flag
is read at import time.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--skip-solve]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from maxreg import kernels
from maxreg.kernels import _numba, _numpy

SOLVE_SNIPPET = """
import time
import numpy as np
from maxreg import kernels
from maxreg.engine import QuadratureSpec, solve_representation
from maxreg.grid import GridFunction, uniform_grid
from maxreg.pde import RobinParams, build_robin
ff, gp, _ = build_robin(RobinParams(n=40, alpha=0.3))
t = uniform_grid({N}, 1.0)
f = GridFunction(t, np.outer(np.cos(3 * t), np.ones(gp.dim)))
q = QuadratureSpec.for_exponents(0.5, 0.3)
solve_representation(ff, f, np.zeros(gp.dim), q)  # warm up the JIT cache
start = time.perf_counter()
solve_representation(ff, f, np.zeros(gp.dim), q)
print(kernels.BACKEND, time.perf_counter() - start)
"""


def cases(rng):
    n, q, k = 200, 600, 400
    d = rng.uniform(1.0, 1e4, n)
    r, w = rng.uniform(0, 1, q), rng.uniform(0, 1e-3, q)
    Z = rng.standard_normal((n, q))
    P = rng.standard_normal((1, n, k + 1))
    jl, lam = rng.integers(0, k, q), rng.uniform(0, 1, q)
    dth = rng.standard_normal((1, q))
    tn = np.linspace(0.0, 1.0, k + 1)
    C = rng.standard_normal((n, k))
    F = rng.standard_normal((n, k + 1))
    x = np.linspace(0.0, 1.0, 2001)
    xi, wq = np.polynomial.legendre.leggauss(3)
    coef = np.ones((x.size - 1, 3))
    return {
        "kernel_accumulate": lambda impl: kernels.kernel_accumulate(d, r, w, Z, impl=impl),
        "affine_accumulate": lambda impl: kernels.affine_accumulate(d, r, w, dth, jl, lam, P, impl=impl),
        "duhamel_accumulate": lambda impl: kernels.duhamel_accumulate(d, 1.0, tn, C, impl=impl),
        "linear_duhamel_accumulate": lambda impl: kernels.linear_duhamel_accumulate(d, 1.0, tn, F, impl=impl),
        "assemble_1d": lambda impl: kernels.assemble_1d(x, 0.5 * (xi + 1), 0.5 * wq, coef, 1, impl=impl),
    }


def bench_kernels(repeat):
    print(f"{'kernel':<28}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, run in cases(np.random.default_rng(0)).items():
        run(_numba)  # compile
        assert np.allclose(run(_numba), run(_numpy))
        times = {}
        for label, impl in (("numpy", _numpy), ("numba", _numba)):
            times[label] = min(timeit.repeat(lambda: run(impl), number=1, repeat=repeat)) * 1e3
        print(f"{name:<28}{times['numpy']:>10.3f}{times['numba']:>10.3f}{times['numpy'] / times['numba']:>8.1f}x")


def bench_solve(N):
    print(f"\nend-to-end solve, Robin n=40, N={N}")
    for backend in ("numpy", "numba"):
        env = {**os.environ, "MAXREG_BACKEND": backend}
        out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(N=N)], env=env,
                             capture_output=True, text=True, check=True)
        name, secs = out.stdout.split()
        print(f"  {name:<6} {float(secs):8.3f} s")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=200, help="time steps for the end-to-end solve")
    ap.add_argument("--skip-solve", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.repeat)
    if not args.skip_solve:
        bench_solve(args.steps)


if __name__ == "__main__":
    main()
