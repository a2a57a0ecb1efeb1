"""Compare the compiled and numpy Monte Carlo kernels.

    python3 benchmarks/bench_kernel.py [--pairs N] [--repeat R]
"""

import argparse
import time

import numpy as np

from cqm import kernel
from cqm.montecarlo import ExperimentConfig, _kernel_params


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--pairs", type=int, default=1_200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--cycles", type=int, default=5)
    args = ap.parse_args()

    cfg = ExperimentConfig(cycles=args.cycles)
    edges = cfg.bin_edges()
    params = _kernel_params(cfg, edges.size - 1, float(edges[0]))
    key = kernel.stream_key(cfg.seed)

    results = {}
    for name, sim in sorted(kernel.backends().items()):
        best = float("inf")
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            counts, _ = sim(key, 0, args.pairs, params)
            best = min(best, time.perf_counter() - t0)
        results[name] = counts
        print(f"{name:8s} {best * 1e3:9.1f} ms  {args.pairs / best / 1e6:7.2f} Mpairs/s")

    if len(results) > 1:
        same = all(np.array_equal(c, results["python"]) for c in results.values())
        print("histograms identical:", same)
    print("selected backend:", kernel.BACKEND)


if __name__ == "__main__":
    main()
