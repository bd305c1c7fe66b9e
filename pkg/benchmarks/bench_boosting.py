#!/usr/bin/env python3
"""Benchmark the compiled split kernel against the pure-numpy fallback.

Fits the same boosted ensembles through both kernels, reports wall time and
speedup, and verifies the outputs are bit-identical (they share the sorting
path and mirror each other's arithmetic).

Usage: python benchmarks/bench_boosting.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from paqol.boosting import TreeParams, fit_boosted_trees, force_kernel, predict


def _time_fit(kernel: str, x, y, params, repeats: int) -> tuple[float, np.ndarray]:
    with force_kernel(kernel):
        fit_boosted_trees(x, y, params)  # warm-up
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            model = fit_boosted_trees(x, y, params)
            best = min(best, time.perf_counter() - t0)
        return best, predict(model, x)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    try:
        from paqol import _splitcore  # noqa: F401
    except ImportError:
        raise SystemExit(
            "compiled kernel not built; run `pip install -e . --no-build-isolation` first"
        )

    cases = [
        ("refuter-sized arm (n=2500, 2 features)", 2_500, 2, TreeParams()),
        ("cohort-sized fit (n=5000, 6 features)", 5_000, 6, TreeParams()),
        ("deeper trees (n=5000, 6 features, depth 4)", 5_000, 6, TreeParams(max_depth=4)),
        ("small cohort (n=500, 4 features, mcs=20)", 500, 4, TreeParams(min_child_samples=20)),
    ]
    print(f"{'case':<45} {'compiled':>10} {'python':>10} {'speedup':>8}  identical")
    for label, n, n_features, params in cases:
        rng = np.random.default_rng(42)
        x = rng.standard_normal((n, n_features))
        y = x @ rng.standard_normal(n_features) + rng.standard_normal(n)
        t_fast, p_fast = _time_fit("compiled", x, y, params, args.repeats)
        t_slow, p_slow = _time_fit("python", x, y, params, args.repeats)
        same = bool(np.array_equal(p_fast, p_slow))
        print(
            f"{label:<45} {t_fast*1e3:>8.1f}ms {t_slow*1e3:>8.1f}ms "
            f"{t_slow/t_fast:>7.2f}x  {same}"
        )
        if not same:
            raise SystemExit("kernel outputs diverged; the twins are out of sync")


if __name__ == "__main__":
    main()
