"""Wall-clock comparison of the numpy and numba kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Two problem sizes: the reference interval run (2 boundary nodes, 10 modes)
and the 24x24 square smoke run (96 boundary nodes, 6 modes).
"""

import argparse
import math
import timeit

import numpy as np

from patspec import _kernels

SIZES = {"interval": (2, 10, 11.0), "square": (96, 6, 12.0)}


def make_case(rng, n_boundary, n_modes, lam_top):
    lam = np.sort(rng.uniform(0.7, lam_top, n_modes))
    dt = 2 * math.pi / (40 * lam.max())
    eps = np.array([0.4, 0.2, 0.1, 0.05])
    m = np.array([int(math.ceil(math.log(1e10) / e / dt)) for e in eps], dtype=np.int64)
    m += m % 2
    n = int(m.max())
    amps = rng.standard_normal((n_boundary, n_modes))
    # one boundary-weighted series per target mode
    series = rng.standard_normal((n_modes, n_boundary)) @ _kernels.cosine_synthesis_numpy(amps, lam, dt, n)
    return {
        "cosine_synthesis": lambda f: f(amps, lam, dt, n),
        "damped_sine_simpson": lambda f: f(series, lam, eps, dt, m),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"numba available: {_kernels.HAVE_NUMBA}")
    print(f"{'size':<9} {'kernel':<20} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for size, dims in SIZES.items():
        for name, call in make_case(rng, *dims).items():
            f_np = getattr(_kernels, name + "_numpy")
            t_np = min(timeit.repeat(lambda: call(f_np), number=1, repeat=args.repeat))
            if not _kernels.HAVE_NUMBA:
                print(f"{size:<9} {name:<20} {1e3 * t_np:>11.2f} {'n/a':>11}")
                continue
            f_nb = getattr(_kernels, name + "_numba")
            call(f_nb)  # compile or load the cache outside the timing
            t_nb = min(timeit.repeat(lambda: call(f_nb), number=1, repeat=args.repeat))
            print(f"{size:<9} {name:<20} {1e3 * t_np:>11.2f} {1e3 * t_nb:>11.2f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
