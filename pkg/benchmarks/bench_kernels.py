#!/usr/bin/env python3
"""Benchmark the compiled LSTM kernels against the pure-numpy fallback.

Runs forward and forward+backward passes at the shapes the models actually
use (question encoder, rank encoder, baseline sequence encoder) and prints
per-call times plus the speedup factor.

Usage: python benchmarks/bench_kernels.py [--iters 300]
"""

import argparse
import importlib
import time

import numpy as np

from photoqa.nncore.kernels import lstm_py

CASES = [
    ("question encoder", 12, 32, 100),
    ("rank encoder", 2, 20, 5),
    ("baseline sequence", 12, 164, 100),
]


def load_backends():
    backends = [("numpy", lstm_py)]
    try:
        cy = importlib.import_module("photoqa.nncore.kernels._lstm_cy")
        backends.append(("cython", cy))
    except ImportError:
        print("compiled kernel not built; benchmarking numpy only")
    return backends


def bench(impl, steps, in_dim, hidden, iters):
    rng = np.random.default_rng(0)
    W = rng.standard_normal((4 * hidden, in_dim + hidden))
    b = rng.standard_normal(4 * hidden)
    X = rng.standard_normal((steps, in_dim))
    dH = rng.standard_normal((steps, hidden))

    impl.lstm_forward(W, b, X, hidden)  # warm up
    t0 = time.perf_counter()
    for _ in range(iters):
        impl.lstm_forward(W, b, X, hidden)
    fwd = (time.perf_counter() - t0) / iters

    t0 = time.perf_counter()
    for _ in range(iters):
        _, cache = impl.lstm_forward(W, b, X, hidden)
        impl.lstm_backward(W, cache, dH, hidden)
    both = (time.perf_counter() - t0) / iters
    return fwd, both


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--iters", type=int, default=300)
    args = parser.parse_args()

    backends = load_backends()
    print(f"{'case':<20} {'backend':<8} {'fwd us':>10} {'fwd+bwd us':>12}")
    for name, steps, in_dim, hidden in CASES:
        results = {}
        for backend_name, impl in backends:
            fwd, both = bench(impl, steps, in_dim, hidden, args.iters)
            results[backend_name] = both
            print(f"{name:<20} {backend_name:<8} {fwd * 1e6:>10.1f} {both * 1e6:>12.1f}")
        if len(results) == 2:
            speedup = results["numpy"] / results["cython"]
            print(f"{'':<20} speedup  {speedup:>10.1f}x")


if __name__ == "__main__":
    main()
