"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 500,1000,10000] [--repeat 200]

Prints the median time per call for each kernel and backend, the speed-up,
and the largest absolute difference between the two results.
"""
import argparse
import statistics
import timeit

import numpy as np

from upe import _kernels_py

try:
    from upe import _kernels
except ImportError:
    _kernels = None


def problem(n, kind, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = x + rng.standard_normal(n)
    q = np.sort(y)[n // 10]
    d = (y <= q).astype(float)
    Z = np.column_stack([x, np.ones(n)])
    theta0 = np.array([0.0, -1.28 if kind == 0 else -2.2])
    return y, q, Z, d, theta0


def cases(n):
    for kind, name in ((0, "probit"), (1, "logit")):
        y, q, Z, d, theta0 = problem(n, kind)
        yield f"link_arrays[{name}]", lambda m, k=kind, v=Z @ theta0: m.link_arrays(k, v), 0
        yield f"fit_binary[{name}]", (
            lambda m, k=kind, Z=Z, d=d, t=theta0: m.fit_binary(Z, d, k, t, 1e-8, 100, 30, 1e4, 1e-10)
        ), 0
    y, q, *_ = problem(n, 0)
    yield "gaussian_kde", lambda m: m.gaussian_kde(y, q, 0.3), None


def median_time(fn, repeat):
    runs = timeit.repeat(fn, number=1, repeat=repeat)
    return statistics.median(runs)


def first_array(result):
    out = result[0] if isinstance(result, tuple) else result
    return np.atleast_1d(np.asarray(out, dtype=float))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="500,1000,10000")
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
        return
    print(f"{'kernel':<22}{'n':>7}{'compiled us':>14}{'python us':>12}{'speed-up':>10}{'max diff':>11}")
    for n in (int(s) for s in args.sizes.split(",")):
        for label, fn, _ in cases(n):
            tc = median_time(lambda: fn(_kernels), args.repeat) * 1e6
            tp = median_time(lambda: fn(_kernels_py), args.repeat) * 1e6
            diff = np.max(np.abs(first_array(fn(_kernels)) - first_array(fn(_kernels_py))))
            print(f"{label:<22}{n:>7}{tc:>14.1f}{tp:>12.1f}{tp / tc:>10.2f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
