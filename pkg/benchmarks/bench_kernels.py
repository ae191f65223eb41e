"""Compare the numba kernels with their numpy fallbacks.

    python benchmarks/bench_kernels.py [--sizes 16384 1048576] [--repeat 5]

The first numba call compiles (or loads from cache) and is excluded.
End-to-end, ``DAMPWAVE_NUMBA=0`` selects the numpy path for the whole package.
"""

import argparse
import json
import time

import numpy as np

from dampwave import _kernels as K


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(size, rng):
    r = rng.uniform(0.0, 1.2, size)
    xi = np.abs(rng.normal(0.0, 30.0, size))
    coeffs = K.propagator_coefficients_numpy(xi, 0.25, 0.01)
    uh = rng.normal(size=size) + 1j * rng.normal(size=size)
    vh = rng.normal(size=size) + 1j * rng.normal(size=size)
    u = rng.normal(size=size)
    f0 = 0.3
    return {
        "cutoff_log_terms": (K.cutoff_log_terms_numba, K.cutoff_log_terms_numpy, (r, 0.05, 10.0)),
        "propagator_coefficients": (K.propagator_coefficients_numba, K.propagator_coefficients_numpy, (xi, 0.25, 0.01)),
        "apply_propagator": (K.apply_propagator_numba, K.apply_propagator_numpy, (*coeffs, uh, vh)),
        "abs_pow": (K.abs_pow_numba, K.abs_pow_numpy, (u, 2.5)),
        "second_difference_sum": (K.second_difference_sum_numba, K.second_difference_sum_numpy, (u, u[::-1].copy(), f0, np.abs(u))),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[1 << 14, 1 << 20])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not installed")

    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':26s} {'size':>9s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for size in args.sizes:
        for name, (fast, slow, a) in cases(size, rng).items():
            tn = best_of(fast, a, args.repeat)
            tp = best_of(slow, a, args.repeat)
            rows.append({"kernel": name, "size": size, "numba_s": tn, "numpy_s": tp, "speedup": tp / tn})
            print(f"{name:26s} {size:9d} {1e3 * tn:10.3f} {1e3 * tp:10.3f} {tp / tn:8.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
