"""Time the compiled core against the NumPy fallback.

    python benchmarks/bench_core.py [--repeat 5]

Each routine runs on inputs sized like one augmented-layout fit (about 1000
rows, 8 columns) and like one trial's test-path simulation.
"""
import argparse
import timeit

import numpy as np

from mrgp import _fallback

try:
    from mrgp import _core
except ImportError:
    _core = None


def cases(rng):
    X = rng.normal(size=(1000, 8))
    inv = rng.uniform(0.1, 2.0, 8)
    M = rng.normal(size=(1000, 1000))
    Z = rng.normal(size=(1000, 50))
    x0 = rng.normal(size=1000)
    return {
        "sqdist_ard 1000x1000x8": lambda m: m.sqdist_ard(X, X, inv),
        "ard_contract 1000x8": lambda m: m.ard_contract(X, inv, M),
        "ou_recurse 1000 paths x 50": lambda m: m.ou_recurse(x0, 0.0, 0.99, 0.1, Z),
        "ou_recurse 1 x 2500": lambda m: m.ou_recurse(x0[:1], 0.0, 0.99, 0.1, Z.reshape(1, -1)),
    }


def best_of(fn, repeat):
    t = timeit.Timer(fn)
    n, _ = t.autorange()
    return min(t.repeat(repeat, n)) / n


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _core is None:
        print("compiled core not built; only the fallback is timed")
    print(f"{'routine':28s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, call in cases(np.random.default_rng(args.seed)).items():
        t_np = best_of(lambda: call(_fallback), args.repeat)
        if _core is None:
            print(f"{name:28s} {t_np * 1e3:10.3f}")
            continue
        t_cy = best_of(lambda: call(_core), args.repeat)
        print(f"{name:28s} {t_np * 1e3:10.3f} {t_cy * 1e3:10.3f} {t_np / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
