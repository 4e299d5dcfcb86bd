"""FLOPs-guided architecture search for spiking vision transformers, no training required."""

from .cost_model import FlopsBreakdown, ParamBreakdown, flops_mlp, flops_sa, flops_snn, in_band, param_count
from .evo_search import Candidate, SearchConfig, SearchResult, exhaustive_search, run_search
from .genome import TIERS, ArchGenome, RunConfig, SearchSpaceTier, crossover, mutate, sample, validate
from .rank_stats import CorrelationReport, correlate, kendall_tau, spearman_rho

__version__ = "0.1.0"

__all__ = [
    "TIERS", "ArchGenome", "Candidate", "CorrelationReport", "FlopsBreakdown", "ParamBreakdown", "RunConfig",
    "SearchConfig", "SearchResult", "SearchSpaceTier", "correlate", "crossover", "exhaustive_search", "flops_mlp",
    "flops_sa", "flops_snn", "in_band", "kendall_tau", "mutate", "param_count", "run_search", "sample",
    "spearman_rho", "validate",
]
