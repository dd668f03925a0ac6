"""Time the compiled and pure-Python hot loops side by side.

    python benchmarks/bench_kernels.py [--n 200000] [--repeat 3]

Both backends are imported directly so one process can compare them; the
outputs are checked for agreement before timing is reported.
"""
import argparse
import time

import numpy as np

from tandemtoi import _pykernels

try:
    from tandemtoi import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    n = args.n
    arrivals = np.cumsum(rng.standard_exponential(n) / 2.0)
    services = rng.standard_exponential(n) / 5.0
    rho = np.exp(-rng.uniform(0.01, 0.5, n - 1))
    innov = rng.standard_normal(n - 1)

    cases = {
        "fifo_departures": lambda k: k.fifo_departures(arrivals, services),
        "ar1_filter": lambda k: k.ar1_filter(rho, innov, 0.3),
    }
    print(f"n = {n}, best of {args.repeat}")
    print(f"{'kernel':<18}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, call in cases.items():
        t_py = _best_of(lambda: call(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<18}{t_py:>12.4f}{'n/a':>12}{'n/a':>10}")
            continue
        ref, out = call(_pykernels), call(_ckernels)
        ref = ref if isinstance(ref, tuple) else (ref,)
        out = out if isinstance(out, tuple) else (out,)
        for r, o in zip(ref, out):
            np.testing.assert_allclose(np.asarray(o), np.asarray(r), rtol=1e-12, atol=0)
        t_c = _best_of(lambda: call(_ckernels), args.repeat)
        print(f"{name:<18}{t_py:>12.4f}{t_c:>12.5f}{t_py / t_c:>9.0f}x")


if __name__ == "__main__":
    main()
