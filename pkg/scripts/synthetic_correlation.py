"""Rank correlation between the FLOPs score and a synthetic accuracy curve.

Real accuracies need trained networks. This script stands in a noisy
log-FLOPs curve so the correlation pipeline can be exercised end to end:
sample in-band genomes, write a CSV with an accuracy column, then run the
``correlate`` command on it.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from spikenas import cli
from spikenas.genome import TIERS, RunConfig
from spikenas.rank_stats import sample_genomes, synthetic_samples


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="FLOPs vs synthetic accuracy correlation")
    ap.add_argument("--tier", default="small", choices=sorted(TIERS))
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--noise", type=float, nargs="+", default=[1.0, 2.0, 3.0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    a = ap.parse_args(argv)

    cfg = RunConfig(seed=a.seed)
    a.out_dir.mkdir(parents=True, exist_ok=True)
    for noise in a.noise:
        rng = np.random.default_rng([a.seed, int(noise * 1000)])
        genomes = sample_genomes(TIERS[a.tier], cfg, a.count, rng)
        samples = synthetic_samples(genomes, cfg, noise=noise, rng=rng)
        path = a.out_dir / f"synthetic_{a.tier}_noise{noise:g}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tier", "embed_dim", "mlp_ratio", "num_heads", "depth", "accuracy"])
            for s in samples:
                w.writerow([a.tier, *s.genome.as_tuple(), f"{s.accuracy:.4f}"])
        print(f"noise {noise:g} pp -> {path}")
        code = cli.main(["correlate", str(path)])
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
