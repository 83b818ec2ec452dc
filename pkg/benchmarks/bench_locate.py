"""Compare the numba and numpy point-location kernels.

    python benchmarks/bench_locate.py [--n 1000000] [--repeat 5]

Both kernels run in the same process; the numba loop is warmed up first so
compile time is excluded.  Results are checked for equality.
"""
import argparse
import time

import numpy as np

from qempc import _kernels
from qempc._accel import HAVE_NUMBA
from qempc.fixtures import load_fixture
from qempc.quantize import FixedPointFormat, quantize_partition


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--fixture", default="HET2")
    args = ap.parse_args()

    p = load_fixture(args.fixture)
    X = np.random.default_rng(0).uniform(p.lo, p.hi, size=(args.n, p.n))
    H, K, rs, tol = p.H_all, p.K_all, p.row_start, p.tol
    qp = quantize_partition(p, FixedPointFormat(16, 9), FixedPointFormat(16, 9))
    Xm = qp.state_mantissas(X)
    Hm, Ks = qp._location_data

    cases = {
        "float": (
            lambda: _kernels.locate_float_loop(X, H, K, rs, tol),
            lambda: _kernels.locate_float_numpy(X, H, K, rs, tol),
        ),
        "int64": (
            lambda: _kernels.locate_int_loop(Xm, Hm, Ks, rs),
            lambda: _kernels.locate_int_numpy(Xm, Hm, Ks, rs),
        ),
    }
    print(f"{args.fixture}: {p.n_regions} regions, {len(K)} rows, {args.n} states, numba={'yes' if HAVE_NUMBA else 'no'}")
    for name, (loop, vec) in cases.items():
        loop()  # warm-up / JIT compile
        t_loop, a = best_of(loop, args.repeat)
        t_vec, b = best_of(vec, args.repeat)
        assert np.array_equal(a, b), f"{name} kernels disagree"
        label = "numba" if HAVE_NUMBA else "loop (python)"
        print(f"{name:6s} {label:>13s} {t_loop * 1e3:9.1f} ms   numpy {t_vec * 1e3:9.1f} ms   speedup {t_vec / t_loop:5.2f}x")


if __name__ == "__main__":
    main()
