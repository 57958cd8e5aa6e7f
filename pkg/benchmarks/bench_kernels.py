"""Time the compiled kernels against the numpy fallback on identical inputs.

    python3 benchmarks/bench_kernels.py [--trials 100000] [--N 9] [--K 4] [--repeat 5]

Both implementations receive the same pre-drawn arrays; the script checks the
outputs agree before reporting timings.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from scmoa.theory import _kernels_py, kernels

try:
    from scmoa.theory import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def inputs(trials: int, N: int, K: int, seed: int):
    rng = np.random.default_rng(seed)
    answers = rng.integers(0, K, size=(trials, N))
    fresh = rng.integers(0, K, size=(trials, N))
    u = rng.random((trials, N))
    winner, kmax = kernels.plurality(answers, K, impl=_kernels_py)
    correct = (winner == 0).astype(np.uint8)
    kpost = np.minimum(kmax + rng.integers(0, 2, size=trials), N)
    return answers, fresh, u, winner, kmax, correct, kpost


def cases(arrs, N: int, K: int):
    answers, fresh, u, winner, kmax, correct, kpost = arrs
    return {
        "plurality": lambda impl: kernels.plurality(answers, K, impl=impl),
        "refine_step": lambda impl: kernels.refine_step(answers, winner, fresh, u, 0.3, 0.4, True, impl=impl),
        "level_tally": lambda impl: kernels.level_tally(kmax, correct, N, impl=impl),
        "transition_counts": lambda impl: kernels.transition_counts(kmax, kpost, N, impl=impl),
    }


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--N", type=int, default=9)
    ap.add_argument("--K", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels_c is None:
        print("compiled extension not built; only the fallback can be timed")
    arrs = inputs(args.trials, args.N, args.K, args.seed)
    print(f"trials={args.trials} N={args.N} K={args.K} best of {args.repeat}")
    print(f"{'kernel':<18} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for name, fn in cases(arrs, args.N, args.K).items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _kernels_c is None:
            print(f"{name:<18} {t_py:10.2f} {'-':>10} {'-':>8}")
            continue
        if not _same(fn(_kernels_py), fn(_kernels_c)):
            raise SystemExit(f"{name}: backends disagree")
        t_c = min(timeit.repeat(lambda: fn(_kernels_c), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18} {t_py:10.2f} {t_c:10.2f} {t_py / t_c:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
