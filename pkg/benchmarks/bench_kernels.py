"""Benchmark the compiled kernels against the pure-numpy backend.

Times the three hot kernels (pairwise distances, Weibull fit, inclusion
matrix) plus one end-to-end batch fit on each available backend and prints
a small table. Run from a checkout with the package installed:

    python benchmarks/bench_kernels.py [--size 400] [--dim 32] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import ievm
from ievm import backends


def _best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _bench_backend(name: str, size: int, dim: int, repeat: int) -> dict[str, float]:
    backends.set_backend(name)
    kernels = backends.get()
    rng = np.random.default_rng(7)
    a = rng.normal(size=(size, dim))
    b = rng.normal(size=(size, dim))
    tail = np.sort(rng.gamma(2.0, 1.5, size=min(size, 75)))
    dists = kernels.pairwise_distances(a, b, 0)
    shapes = rng.uniform(0.8, 6.0, size=size)
    scales = rng.uniform(0.5, 4.0, size=size)
    samples = [
        ievm.LabeledSample(a[i], f"class_{i % 4}") for i in range(size)
    ]

    return {
        "pairwise": _best_of(lambda: kernels.pairwise_distances(a, b, 0), repeat),
        "weibull": _best_of(
            lambda: [kernels.weibull_mle(tail, 100, 1e-9, 1e-3, 1e4) for _ in range(200)],
            repeat,
        ),
        "inclusion": _best_of(lambda: kernels.inclusion_matrix(shapes, scales, dists), repeat),
        "batch_fit": _best_of(
            lambda: ievm.batch_fit(samples, ievm.EVMConfig(tail_size=20)), repeat
        ),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=400)
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    names = backends.available_backends()
    print(f"available backends: {', '.join(names)}")
    results = {name: _bench_backend(name, args.size, args.dim, args.repeat) for name in names}

    rows = ["pairwise", "weibull", "inclusion", "batch_fit"]
    header = ["kernel"] + [f"{n} (s)" for n in names]
    if len(names) == 2:
        header.append("speedup")
    print("  ".join(f"{h:>14}" for h in header))
    for row in rows:
        cells = [f"{row:>14}"] + [f"{results[n][row]:>14.6f}" for n in names]
        if len(names) == 2:
            base, other = results[names[0]][row], results[names[1]][row]
            fast = base / other if other else float("inf")
            cells.append(f"{fast:>14.2f}x")
        print("  ".join(cells))


if __name__ == "__main__":
    main()
