"""Compare evolutionary search against exhaustive enumeration on the built-in tiers.

Usage: python scripts/search_tiers.py [--trials 20] [--out results/search_tiers.csv]
"""

import argparse
import csv
import sys
import time
from pathlib import Path

from spikenas.evo_search import SearchConfig, exhaustive_search, run_search
from spikenas.genome import TIERS, RunConfig


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--timesteps", type=int, default=4)
    ap.add_argument("--out", type=Path, default=None)
    a = ap.parse_args(argv)

    cfg = RunConfig(timesteps=a.timesteps)
    rows = []
    for name, tier in TIERS.items():
        optimum = exhaustive_search(tier, cfg)
        t0 = time.perf_counter()
        hits = sum(run_search(tier, cfg, SearchConfig(seed=s)).best.score == optimum.score for s in range(a.trials))
        elapsed = time.perf_counter() - t0
        rows.append([name, tier.grid_size, str(optimum.genome), optimum.score, optimum.params, hits, a.trials,
                     f"{elapsed:.2f}"])
        print(f"{name:5s} grid={tier.grid_size:5d} optimum={optimum.genome} flops={optimum.score} "
              f"params={optimum.params} hits={hits}/{a.trials} ({elapsed:.1f}s)")

    if a.out is not None:
        a.out.parent.mkdir(parents=True, exist_ok=True)
        with a.out.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tier", "grid_size", "optimum", "snn_flops", "params", "hits", "trials", "seconds"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
