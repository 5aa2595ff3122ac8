"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat 3]

Each kernel is run on both backends with identical arguments; outputs are
checked for bitwise equality before timings are reported.
"""
import argparse
import timeit

import numpy as np

from swingsim.kernels import available_backends


def cases():
    xi = np.array([1 / 3, 2 / 3])
    pstar = np.array([0.5, 1.0])
    return {
        "rk4_linear 30 s, h=1e-3": (
            "rk4_linear_segment",
            (0.0, 0.0, 0.0, 30.0, 1e-3, 0.1, 0.2, 1.5, 1.0, -0.5, 0.0, 10)),
        "rk4_lagged 10 s, h=1e-3": (
            "rk4_lagged_segment",
            (0.0, 0.0, 0.0, 0.0, pstar.copy(), 0.0, 10.0, 1e-3, 0.1, 0.05, 0.15, 1.5, 0.0, 1.0,
             -0.5, 0.0, xi, pstar, 1.0, 1e-3, 1e-3, 10)),
        "grid n=3, 1001^2 points": (
            "grid_exhaustive",
            (np.array([1.0, 2.0, 4.0]), 0.5, -2.0, 4.0 / 1000, 1000)),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the Python backend only")
    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for label, (fn, a) in cases().items():
        times, outs = {}, {}
        for name, mod in backends.items():
            f = getattr(mod, fn)
            outs[name] = f(*a)
            n = 1 if name == "python" else 5
            times[name] = min(timeit.repeat(lambda: f(*a), number=n, repeat=args.repeat)) / n
        if "cython" in outs and not _same(outs["python"], outs["cython"]):
            raise SystemExit(f"{label}: backends disagree")
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:<28}" + "".join(f"{times[k] * 1e3:>10.2f}ms" for k in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
