"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 100000] [--modes 10] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from branchpde import kernels, rng


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000, help="particles")
    ap.add_argument("--modes", type=int, default=10, help="truncation K")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if kernels.backend_name() == "numpy":
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    rs = np.random.default_rng(0)
    pos = rs.uniform(0, 2 * np.pi, size=(args.n, 2))
    K = args.modes
    coeffs = rs.normal(size=(2 * K + 1, 2 * K + 1))
    ids = np.arange(args.n, dtype=np.uint64)
    key = rng.stream_key(1, rng.TAG_SDE)

    def philox_numpy():
        saved, rng._compiled_pair = rng._compiled_pair, None
        try:
            rng.uniform_pair(key, ids, 3, 0)
        finally:
            rng._compiled_pair = saved

    cases = [
        ("project", lambda: kernels.basis_sums(pos, K), lambda: kernels.basis_sums(pos, K, force_python=True)),
        ("evaluate", lambda: kernels.evaluate(coeffs, pos), lambda: kernels.evaluate(coeffs, pos, force_python=True)),
        ("evaluate+grad", lambda: kernels.evaluate(coeffs, pos, True),
         lambda: kernels.evaluate(coeffs, pos, True, force_python=True)),
        ("philox uniforms", lambda: rng.uniform_pair(key, ids, 3, 0), philox_numpy),
    ]
    print(f"N={args.n} K={K} best of {args.repeat}")
    print(f"{'kernel':<16}{'compiled [ms]':>15}{'numpy [ms]':>13}{'speedup':>10}")
    for name, fast, slow in cases:
        tf, ts = best(fast, args.repeat), best(slow, args.repeat)
        print(f"{name:<16}{tf * 1e3:>15.2f}{ts * 1e3:>13.2f}{ts / tf:>9.1f}x")


if __name__ == "__main__":
    main()
