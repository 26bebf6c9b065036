"""Compiled versus numpy kernels: elementwise activations and the Hermite table.

Usage: python benchmarks/bench_kernels.py [--size N] [--repeat R]

Prints one line per kernel with the best-of-R time of each backend and the
speedup of the compiled one.  Without the compiled extension only the numpy
column is printed.
"""

import argparse
import timeit

import numpy as np

from statnorm import kernels


def best_ms(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number * 1e3


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128 * 128)
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--number", type=int, default=50)
    args = ap.parse_args(argv)

    x = np.random.default_rng(0).standard_normal(args.size)
    have_compiled = kernels.BACKEND == "cython"
    backends = ["python", "cython"] if have_compiled else ["python"]
    print(f"active backend: {kernels.BACKEND}; {args.size} elements; best of {args.repeat}")
    print(f"{'kernel':<16}" + "".join(f"{b + ' ms':>14}" for b in backends) + ("    speedup" if have_compiled else ""))

    cases = [(name, lambda b, c=code: kernels.activation_forward(c, x, 0.3, 0.1, 1.2, backend=b))
             for name, code in sorted(kernels.CODES.items(), key=lambda kv: kv[1])]
    nodes = np.linspace(-6, 6, 256)
    cases.append(("hermite_table", lambda b: kernels.hermite_table(40, nodes, backend=b)))

    for name, fn in cases:
        times = [best_ms(lambda b=b: fn(b), args.repeat, args.number) for b in backends]
        line = f"{name:<16}" + "".join(f"{t:>14.4f}" for t in times)
        if have_compiled:
            line += f"{times[0] / times[1]:>10.2f}x"
        print(line)
    routed = sorted(n for n, c in kernels.CODES.items() if c in kernels.COMPILED_CODES)
    print(f"default routing sends {', '.join(routed)} to the compiled loop and the rest to numpy")


if __name__ == "__main__":
    main()
