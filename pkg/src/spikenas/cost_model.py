"""Analytic FLOPs metric and parameter count.

Everything here is closed-form integer arithmetic on the genome; no tensors
are ever built. The FLOPs score is the search objective, the parameter count
only decides whether a genome is inside a tier's band.
"""

from __future__ import annotations

from dataclasses import dataclass

from .genome import ArchGenome, InvalidGenomeError, RunConfig, SearchSpaceTier

INT64_MAX = 2**63 - 1

SCORE_COLUMNS = ("sa_flops", "mlp_flops", "ann_total", "snn_total", "total_params")


def _checked(value: int, what: str) -> int:
    # results are exchanged as int64 (CSV, numpy); refuse to hand out anything wider
    if value > INT64_MAX:
        raise OverflowError(f"{what} = {value} exceeds the int64 range")
    return value


def _nonneg(**kwargs) -> None:
    for name, v in kwargs.items():
        if v < 0:
            raise ValueError(f"{name} must be >= 0, got {v}")


def flops_sa(depth: int, seq_len: int, embed_dim: int) -> int:
    """Self-attention FLOPs, ``L * n * d * (2d + n)``."""
    _nonneg(depth=depth, seq_len=seq_len, embed_dim=embed_dim)
    return _checked(depth * seq_len * embed_dim * (2 * embed_dim + seq_len), "flops_sa")


def flops_mlp(depth: int, seq_len: int, embed_dim: int, hidden_dim: int) -> int:
    """MLP FLOPs, ``L * n * (d * d_mlp + d_mlp * d)``."""
    _nonneg(depth=depth, seq_len=seq_len, embed_dim=embed_dim, hidden_dim=hidden_dim)
    return _checked(depth * seq_len * (embed_dim * hidden_dim + hidden_dim * embed_dim), "flops_mlp")


@dataclass(frozen=True)
class FlopsBreakdown:
    sa_flops: int
    mlp_flops: int
    ann_total: int
    snn_total: int
    timesteps: int

    @property
    def score(self) -> int:
        return self.snn_total


def flops_snn(g: ArchGenome, cfg: RunConfig) -> FlopsBreakdown:
    n = cfg.seq_len
    sa = flops_sa(g.depth, n, g.embed_dim)
    mlp = flops_mlp(g.depth, n, g.embed_dim, g.hidden_dim)
    ann = _checked(sa + mlp, "ann_total")
    return FlopsBreakdown(sa, mlp, ann, _checked(cfg.timesteps * ann, "snn_total"), cfg.timesteps)


@dataclass(frozen=True)
class ParamBreakdown:
    block_params: int
    spe_params: int
    head_params: int
    total: int


def spe_channels(embed_dim: int, in_channels: int) -> list[tuple[int, int]]:
    """(in, out) channels of the four patch-embedding convs, then the position conv."""
    d = embed_dim
    return [(in_channels, d // 8), (d // 8, d // 4), (d // 4, d // 2), (d // 2, d), (d, d)]


def param_count(g: ArchGenome, cfg: RunConfig) -> ParamBreakdown:
    """Weight count of the bias-free, norm-free Spiking Transformer.

    Blocks hold Q/K/V/output projections plus two MLP linears; the patch
    embedding is a 3x3 conv ladder ``c_in -> d/8 -> d/4 -> d/2 -> d`` followed
    by a 3x3 ``d -> d`` relative-position conv; the head is a single linear.
    """
    d = g.embed_dim
    if d % 8:
        raise InvalidGenomeError(f"embed_dim {d} must be divisible by 8 for the conv ladder")
    block = g.depth * (4 * d * d + 2 * d * g.hidden_dim)
    spe = sum(9 * cin * cout for cin, cout in spe_channels(d, cfg.in_channels))
    head = d * cfg.num_classes
    return ParamBreakdown(block, spe, head, block + spe + head)


def in_band(g: ArchGenome, tier: SearchSpaceTier, cfg: RunConfig) -> bool:
    lo, hi = tier.param_band
    return lo <= param_count(g, cfg).total <= hi


def score_row(g: ArchGenome, cfg: RunConfig) -> dict[str, int]:
    f = flops_snn(g, cfg)
    return {
        "sa_flops": f.sa_flops,
        "mlp_flops": f.mlp_flops,
        "ann_total": f.ann_total,
        "snn_total": f.snn_total,
        "total_params": param_count(g, cfg).total,
    }
