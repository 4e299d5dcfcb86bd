"""Check the analytic parameter count against published model sizes.

The reference sizes are the commonly quoted totals for three Spikformer
configurations on CIFAR-10 (4-256, 5-384, 8-512).
"""

import sys

from spikenas.cost_model import flops_snn, param_count
from spikenas.genome import ArchGenome, RunConfig

REFERENCE = [
    (ArchGenome(256, 4, 4, 4), 4.15e6),
    (ArchGenome(384, 4, 8, 5), 11.32e6),
    (ArchGenome(512, 4, 8, 8), 29.68e6),
]


def main() -> int:
    cfg = RunConfig()
    worst = 0.0
    print(f"{'genome':22s} {'blocks':>10s} {'spe':>9s} {'head':>6s} {'total':>10s} {'reference':>10s} {'dev':>7s}"
          f" {'snn_flops':>13s}")
    for g, ref in REFERENCE:
        p = param_count(g, cfg)
        dev = p.total / ref - 1
        worst = max(worst, abs(dev))
        print(f"{str(g):22s} {p.block_params:10d} {p.spe_params:9d} {p.head_params:6d} {p.total:10d} {ref:10.0f} {dev:+7.2%}"
              f" {flops_snn(g, cfg).snn_total:13d}")
    print(f"worst deviation {worst:.2%}")
    return 0 if worst <= 0.05 else 1


if __name__ == "__main__":
    sys.exit(main())
