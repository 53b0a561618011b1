"""Time the compiled core against the numpy fallback on the hot kernels.

Usage: python3 benchmarks/bench_core.py [--T 50] [--n 20000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from zerochain import _pycore
from zerochain._backend import COMPILED


def cases(core, X, m):
    return {
        "chain_value": lambda: core.chain_value(X),
        "chain_grad": lambda: core.chain_grad(X),
        "theta": lambda: core.theta(X),
        "g_basic": lambda: core.g_basic(X, m),
        "g_smooth": lambda: core.g_smooth(X, m),
        "g_stat": lambda: core.g_stat(X, m),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=50)
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    gen = np.random.default_rng(args.seed)
    X = np.ascontiguousarray(gen.uniform(-3, 3, (args.n, args.T)))
    m = np.ascontiguousarray(gen.integers(0, 2, args.n).astype(float) / 0.5)

    backends = {"python": _pycore}
    if COMPILED is not None:
        backends["compiled"] = COMPILED
    else:
        print("compiled core not built; timing the numpy fallback only")

    print(f"n={args.n} points, T={args.T}, best of {args.repeat}")
    print(f"{'kernel':<12}" + "".join(f"{b:>14}" for b in backends) + ("    speedup" if len(backends) == 2 else ""))
    for name in cases(_pycore, X, m):
        times = {}
        for b, core in backends.items():
            fn = cases(core, X, m)[name]
            times[b] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        row = f"{name:<12}" + "".join(f"{times[b] * 1e3:>12.2f}ms" for b in backends)
        if len(backends) == 2:
            row += f"  {times['python'] / times['compiled']:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
