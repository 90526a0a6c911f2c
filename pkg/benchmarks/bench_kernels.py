"""Compiled core vs pure-Python fallback on the three hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per (kernel, backend) with the best wall time. Compiled
lines add the speed-up and the deviation from the fallback, relative to the
size of the result. The fallback integrates all leaves as one vectorized
system, so its per-leaf overhead is small and the gap there is modest.
"""
import argparse
import math
import time

import numpy as np

from foliation_lab.kernels import backends


def _best(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(rng):
    order = 24
    a = rng.normal(size=(order + 1, order + 1)) + 1j * rng.normal(size=(order + 1, order + 1))
    b = rng.normal(size=(order + 1, order + 1)) + 1j * rng.normal(size=(order + 1, order + 1))
    c = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    z = rng.normal(size=20000) + 1j * rng.normal(size=20000)
    w = rng.normal(size=20000) + 1j * rng.normal(size=20000)

    # leaves of x dy - lam y dx over the unit circle in x, transversal y
    lam = 0.3 + 0.7j
    P = np.zeros((2, 2), complex)
    Q = np.zeros((2, 2), complex)
    P[1, 0] = -lam
    Q[0, 1] = 1.0
    z0 = 0.1 * np.exp(2j * np.pi * np.arange(128) / 128)
    path = (0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 2 * math.pi)  # w = zeta on |zeta| = 1

    return {
        "mul2 (order 24)": lambda k: k.mul2(a, b, order),
        "polyval2 (deg 8, 20k pts)": lambda k: k.polyval2(c, z, w),
        "integrate_leaves (128 leaves)": lambda k: k.integrate_leaves(
            P, Q, *path, z0, 1e-12, 1e-14, math.inf, 200000)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    found = backends()
    rng = np.random.default_rng(0)
    for name, run in cases(rng).items():
        t_py, ref = _best(lambda: run(found["python"]), args.repeat)
        print(f"{name:32s} python   {t_py * 1e3:9.2f} ms")
        if "compiled" in found:
            t_c, out = _best(lambda: run(found["compiled"]), args.repeat)
            ref = np.asarray(ref)
            dev = float(np.max(np.abs(np.asarray(out) - ref)) / np.max(np.abs(ref)))
            print(f"{name:32s} compiled {t_c * 1e3:9.2f} ms  x{t_py / t_c:7.1f}  rel dev {dev:.1e}")
        else:
            print(f"{name:32s} compiled (not built)")


if __name__ == "__main__":
    main()
