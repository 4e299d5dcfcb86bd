"""Evolutionary and exhaustive search over a tier.

The objective is the FLOPs score; the parameter band is a hard constraint
enforced by rejection. Every random decision draws from a generator seeded
with ``(seed, generation, slot)`` so a generation's children can be produced
in any order, or in parallel, with identical results.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import genome as gn
from .cost_model import flops_snn, param_count
from .genome import ArchGenome, RunConfig, SearchSpaceTier

MAX_EXHAUSTIVE_POINTS = 10**6

# stream tags keep initialisation and evolution sub-seeds disjoint
_INIT, _EVOLVE = 0, 1


class InfeasibleBandError(RuntimeError):
    """No genome inside the tier's parameter band could be found."""


@dataclass(frozen=True)
class SearchConfig:
    population_size: int = 64
    generations: int = 50
    tournament_size: int = 4
    mutation_prob: float = 0.2
    crossover_prob: float = 0.5
    max_rejection_resamples: int = 200
    seed: int = 0

    def __post_init__(self):
        for name in ("population_size", "generations", "tournament_size", "max_rejection_resamples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.tournament_size > self.population_size:
            raise ValueError("tournament_size must not exceed population_size")
        for name in ("mutation_prob", "crossover_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class Candidate:
    genome: ArchGenome
    score: int
    params: int

    def rank_key(self):
        # higher score first, then fewer params, then smallest genome
        return (-self.score, self.params, self.genome.as_tuple())


@lru_cache(maxsize=65536)
def evaluate(g: ArchGenome, cfg: RunConfig) -> Candidate:
    return Candidate(g, flops_snn(g, cfg).snn_total, param_count(g, cfg).total)


def _feasible(c: Candidate, tier: SearchSpaceTier) -> bool:
    lo, hi = tier.param_band
    return lo <= c.params <= hi


def best_of(cands) -> Candidate:
    return min(cands, key=Candidate.rank_key)


@dataclass
class SearchResult:
    best: Candidate
    history: list = field(default_factory=list)  # (generation, best_score, best_params)
    evaluated_count: int = 0
    tier_name: str = ""

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("generation", "best_score", "best_params"))
        w.writerows(self.history)
        return buf.getvalue()

    def best_record(self) -> dict:
        rec = gn.genome_record(self.best.genome, self.tier_name)
        rec.update(score=self.best.score, params=self.best.params)
        return rec

    def best_json(self) -> str:
        return json.dumps(self.best_record(), indent=2) + "\n"


def _rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng([seed, *path])


def _band_error(tier: SearchSpaceTier, tries: int) -> InfeasibleBandError:
    lo, hi = tier.param_band
    return InfeasibleBandError(
        f"tier {tier.name}: no genome with params in [{lo:.6g}, {hi:.6g}] after {tries} samples")


def init_population(tier: SearchSpaceTier, cfg: RunConfig, scfg: SearchConfig) -> list[Candidate]:
    pop, _ = _init_population(tier, cfg, scfg)
    return pop


def _init_population(tier, cfg, scfg):
    pop, evaluated = [], 0
    for slot in range(scfg.population_size):
        rng = _rng(scfg.seed, _INIT, slot)
        for _ in range(scfg.max_rejection_resamples):
            c = evaluate(gn.sample(tier, rng), cfg)
            evaluated += 1
            if _feasible(c, tier):
                pop.append(c)
                break
        else:
            raise _band_error(tier, scfg.max_rejection_resamples)
    return pop, evaluated


def _tournament(ranked: list[Candidate], k: int, rng: np.random.Generator) -> Candidate:
    """Best of ``k`` uniform draws (with replacement) from a best-first ``ranked`` list.

    The winner is the smallest of k uniform indices, i.e. ``floor(n * min U_i)``;
    the minimum of k uniforms is drawn directly as ``1 - U ** (1/k)``.
    """
    n = len(ranked)
    return ranked[min(int(n * (1.0 - rng.random() ** (1.0 / k))), n - 1)]


def _make_child(pop, tier, cfg, scfg, rng):
    """One child: tournament parents, optional crossover, mutation, rejection.

    A slot that keeps producing out-of-band children falls back to its first
    parent, which is feasible by construction.
    """
    evaluated = 0
    for _ in range(scfg.max_rejection_resamples):
        a = _tournament(pop, scfg.tournament_size, rng)
        child = a.genome
        if rng.random() < scfg.crossover_prob:
            b = _tournament(pop, scfg.tournament_size, rng)
            child = gn.crossover(a.genome, b.genome, rng, tier)
        child = gn.mutate(child, tier, scfg.mutation_prob, rng)
        c = evaluate(child, cfg)
        evaluated += 1
        if _feasible(c, tier):
            return c, evaluated
    return a, evaluated


def run_search(tier: SearchSpaceTier, cfg: RunConfig, scfg: SearchConfig) -> SearchResult:
    """Elitist generational search; ``generations`` counts the initial population."""
    pop, evaluated = _init_population(tier, cfg, scfg)
    best = best_of(pop)
    history = [(0, best.score, best.params)]
    for gen in range(1, scfg.generations):
        pop = sorted(pop, key=Candidate.rank_key)
        children = [best]
        for slot in range(1, scfg.population_size):
            child, n = _make_child(pop, tier, cfg, scfg, _rng(scfg.seed, _EVOLVE, gen, slot))
            children.append(child)
            evaluated += n
        pop = children
        best = best_of(pop)
        history.append((gen, best.score, best.params))
    return SearchResult(best, history, evaluated, tier.name)


def exhaustive_search(tier: SearchSpaceTier, cfg: RunConfig,
                      max_points: int = MAX_EXHAUSTIVE_POINTS) -> Candidate:
    if tier.grid_size > max_points:
        raise ValueError(f"tier {tier.name} has {tier.grid_size} grid points, refusing to enumerate more than {max_points}")
    best: Optional[Candidate] = None
    for point in tier.grid():
        g = ArchGenome(*point)
        if g.embed_dim % g.num_heads:
            continue
        c = evaluate(g, cfg)
        if _feasible(c, tier) and (best is None or c.rank_key() < best.rank_key()):
            best = c
    if best is None:
        raise _band_error(tier, tier.grid_size)
    return best


def exhaustive_result(tier: SearchSpaceTier, cfg: RunConfig) -> SearchResult:
    best = exhaustive_search(tier, cfg)
    return SearchResult(best, [(0, best.score, best.params)], tier.grid_size, tier.name)
