"""Per-stage timings over growing task counts at fixed d and k.

Thin wrapper around ``ggmtl bench`` that also fits a log-log slope to the
hypergradient timings.

    python3 scripts/bench_scaling.py --sizes 25,50,100,200,400
"""
import argparse

import numpy as np

from ggmtl.cli import bench_one


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--sizes", default="25,50,100,200,400")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--reps", type=int, default=3, help="keep the fastest of this many runs")
    args = p.parse_args()

    sizes = sorted(int(s) for s in args.sizes.split(","))
    rows = []
    for n in sizes:
        runs = [bench_one(n, args.d, args.k, seed=r) for r in range(args.reps)]
        best = min(runs, key=lambda r: r["timings"]["hypergradient"])
        rows.append(best)
        free = {None: "dense path", True: "yes", False: "NO"}[best["dense_free"]]
        print(f"n={n:5d} nd={n * args.d:6d} m={best['m']:6d} "
              f"inner={best['timings']['inner_solve']:.4f}s "
              f"hypergrad={best['timings']['hypergradient']:.4f}s "
              f"peak={best['hypergradient_peak_bytes'] / 2**20:.2f}MiB dense-free={free}")
    if len(rows) >= 2:
        nd = np.log([r["n"] * args.d for r in rows])
        t = np.log([r["timings"]["hypergradient"] for r in rows])
        print(f"hypergradient time ~ (nd)^{np.polyfit(nd, t, 1)[0]:.2f}")


if __name__ == "__main__":
    main()
