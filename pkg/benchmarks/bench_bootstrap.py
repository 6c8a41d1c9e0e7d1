#!/usr/bin/env python3
"""Benchmark the bootstrap counting kernel: numba JIT vs pure-numpy fallback.

Also times a full paired bootstrap through whichever backend the env selected
(set CLAIMCHECK_NO_NUMBA=1 before running to force the numpy path end to end).
"""

from __future__ import annotations

import argparse
import random
import time

import numpy as np

from claimcheck._kernels import build_numba_kernel, joint_counts_numpy, kernel_backend
from claimcheck.core import Verdict
from claimcheck.metrics import EvalRecord, paired_bootstrap

S, N = Verdict.SUPPORTED, Verdict.NOT_SUPPORTED


def planted_records(n_per_class, err_a, err_b, seed=0):
    rng = random.Random(seed)
    golds = [S] * n_per_class + [N] * n_per_class

    def predictions(err):
        wrong = set(rng.sample(range(2 * n_per_class), round(err * 2 * n_per_class)))
        return [g.flipped() if i in wrong else g for i, g in enumerate(golds)]

    a = [EvalRecord(id=str(i), gold=g, predicted=p)
         for i, (g, p) in enumerate(zip(golds, predictions(err_a)))]
    b = [EvalRecord(id=str(i), gold=g, predicted=p)
         for i, (g, p) in enumerate(zip(golds, predictions(err_b)))]
    return a, b


def time_kernel(fn, codes, idx, repeats):
    fn(codes, idx[:2])  # warm up (and trigger JIT compilation)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(codes, idx)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--records", type=int, default=2000)
    parser.add_argument("--resamples", type=int, default=10_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    codes = rng.integers(0, 8, size=args.records).astype(np.int64)
    idx = rng.integers(0, args.records, size=(args.resamples, args.records), dtype=np.int64)

    print(f"kernel inputs: {args.resamples} resamples x {args.records} records")
    numpy_time = time_kernel(joint_counts_numpy, codes, idx, args.repeats)
    print(f"  numpy   : {numpy_time * 1e3:8.1f} ms")

    try:
        numba_fn = build_numba_kernel()
    except ImportError:
        print("  numba   : not installed")
        numba_fn = None
    if numba_fn is not None:
        numba_time = time_kernel(numba_fn, codes, idx, args.repeats)
        print(f"  numba   : {numba_time * 1e3:8.1f} ms  ({numpy_time / numba_time:.1f}x vs numpy)")
        assert np.array_equal(numba_fn(codes, idx), joint_counts_numpy(codes, idx)), \
            "kernel outputs diverged"
        print("  outputs : identical")

    a, b = planted_records(args.records // 2, 0.15, 0.25)
    start = time.perf_counter()
    result = paired_bootstrap(a, b, metric="bacc", resamples=args.resamples, seed=0)
    elapsed = time.perf_counter() - start
    print(f"full paired_bootstrap via {result.kernel!r} backend: {elapsed * 1e3:.1f} ms "
          f"(delta {result.delta_observed:+.4f}, p {result.p_value:.4f})")
    print(f"selected backend for this process: {kernel_backend()}")


if __name__ == "__main__":
    main()
