"""Benchmark the compiled barrier kernels against the pure-numpy fallback.

Times repeated compensation solves (the hot path of dataset generation and
the brute-force baseline) with each kernel implementation.

Usage: python3 benchmarks/bench_kernels.py [--solves 200] [--seed 0]
"""

import argparse
import time

from noma_coc import SolverConfig, generate_topology, make_instance, solve_compensation
from noma_coc.association import associate
from noma_coc.kernels import get_kernels


def bench(kernel: str, n_solves: int, seed: int) -> tuple[float, float]:
    config = SolverConfig(kernel=kernel)
    total_obj = 0.0
    instances = []
    i = 0
    while len(instances) < n_solves:
        sc = generate_topology(3, 4, 4, seed=seed + i)
        i += 1
        assoc, _ = associate(sc)
        for bs_id in sorted({b for b, _ in assoc.entries.values()}):
            instances.append(make_instance(sc, bs_id, "compensation", assoc=assoc))
    instances = instances[:n_solves]
    t0 = time.perf_counter()
    for inst in instances:
        total_obj += solve_compensation(inst, config).objective
    return time.perf_counter() - t0, total_obj


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--solves", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    results = {}
    for kernel in ("pure", "compiled"):
        try:
            get_kernels(kernel)
        except ImportError:
            print(f"{kernel:>9}: not available")
            continue
        elapsed, obj = bench(kernel, args.solves, args.seed)
        results[kernel] = elapsed
        print(
            f"{kernel:>9}: {elapsed:.3f} s for {args.solves} solves "
            f"({1e3 * elapsed / args.solves:.2f} ms/solve, objective sum {obj:.6f})"
        )
    if len(results) == 2:
        print(f"  speedup: {results['pure'] / results['compiled']:.2f}x (compiled over pure)")


if __name__ == "__main__":
    main()
