import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spikenas.cost_model import flops_snn, in_band, param_count
from spikenas.evo_search import (Candidate, InfeasibleBandError, SearchConfig, _rng, evaluate, exhaustive_result,
                               exhaustive_search, init_population, run_search)
from spikenas.genome import TIERS, ArchGenome, RunConfig, SearchSpaceTier, sample, validate


def brute_force_best(tier, cfg):
    """Enumerate the grid with itertools and pick the best feasible point."""
    ranges = [r.values for r in tier.ranges().values()]
    best = None
    for e, m, h, d in itertools.product(*ranges):
        if e % h:
            continue
        g = ArchGenome(e, m, h, d)
        params = param_count(g, cfg).total
        if not tier.param_band[0] <= params <= tier.param_band[1]:
            continue
        key = (-flops_snn(g, cfg).snn_total, params, (e, m, h, d))
        best = key if best is None or key < best else best
    return ArchGenome(*best[2])


def test_search_config_checks():
    with pytest.raises(ValueError):
        SearchConfig(population_size=2, tournament_size=4)
    with pytest.raises(ValueError):
        SearchConfig(mutation_prob=1.5)


def test_candidate_cache_matches_recomputation(cfg):
    g = ArchGenome(256, 4, 4, 4)
    c = evaluate(g, cfg)
    assert c.score == flops_snn(g, cfg).snn_total and c.params == param_count(g, cfg).total


def test_init_population_tiny_in_band(cfg):
    pop = init_population(TIERS["tiny"], cfg, SearchConfig(seed=3))
    assert len(pop) == 64
    assert all(4e6 <= c.params <= 5e6 for c in pop)
    assert all(validate(c.genome, TIERS["tiny"]) for c in pop)


def test_init_population_unbounded_takes_raw_samples(cfg):
    tier = TIERS["tiny"].with_band(0, math.inf)
    scfg = SearchConfig(seed=17)
    pop = init_population(tier, cfg, scfg)
    raw = [sample(tier, _rng(scfg.seed, 0, slot)) for slot in range(64)]
    assert [c.genome for c in pop] == raw


def test_init_population_infeasible_band(cfg):
    tier = TIERS["tiny"].with_band(1e12, 1e12 + 1)
    with pytest.raises(InfeasibleBandError, match="tiny"):
        init_population(tier, cfg, SearchConfig(max_rejection_resamples=50))


def test_run_search_micro_tier(cfg, micro_tier):
    assert brute_force_best(micro_tier, cfg) == ArchGenome(128, 4, 4, 2)
    result = run_search(micro_tier, cfg, SearchConfig(seed=0))
    assert result.best.genome == ArchGenome(128, 4, 4, 2)


def test_run_search_beats_random_baseline(cfg):
    tier = TIERS["tiny"]
    result = run_search(tier, cfg, SearchConfig(seed=5))
    assert 4e6 <= result.best.params <= 5e6
    rng = np.random.default_rng(5)
    baseline = []
    while len(baseline) < 1000:
        g = sample(tier, rng)
        if in_band(g, tier, cfg):
            baseline.append(flops_snn(g, cfg).snn_total)
    assert result.best.score >= max(baseline)


def test_degenerate_search_returns_initial(cfg):
    scfg = SearchConfig(population_size=1, generations=1, tournament_size=1, seed=9)
    result = run_search(TIERS["tiny"], cfg, scfg)
    assert result.best == init_population(TIERS["tiny"], cfg, scfg)[0]
    assert len(result.history) == 1


def test_history_monotone_and_feasible(cfg):
    result = run_search(TIERS["small"], cfg, SearchConfig(seed=2, population_size=16, generations=30))
    scores = [s for _, s, _ in result.history]
    assert len(scores) == 30
    assert all(a <= b for a, b in zip(scores, scores[1:]))
    assert all(11e6 <= p <= 15e6 for _, _, p in result.history)
    assert result.evaluated_count >= 16 * 30 - 29


def test_run_search_deterministic(cfg):
    scfg = SearchConfig(seed=123, population_size=20, generations=10)
    a, b = run_search(TIERS["base"], cfg, scfg), run_search(TIERS["base"], cfg, scfg)
    assert a == b


def test_children_independent_of_order(cfg):
    # each slot owns its sub-seed, so the slots can be produced in any order
    from spikenas.evo_search import _make_child
    tier, scfg = TIERS["tiny"], SearchConfig(seed=4)
    pop = sorted(init_population(tier, cfg, scfg), key=Candidate.rank_key)
    forward = [_make_child(pop, tier, cfg, scfg, _rng(4, 1, 1, s)) for s in range(1, 10)]
    backward = [_make_child(pop, tier, cfg, scfg, _rng(4, 1, 1, s)) for s in reversed(range(1, 10))]
    assert forward == backward[::-1]


@settings(max_examples=15)
@given(seed=st.integers(0, 2**64 - 1))
def test_every_admitted_candidate_in_band(seed):
    tier, cfg = TIERS["tiny"], RunConfig()
    result = run_search(tier, cfg, SearchConfig(seed=seed, population_size=8, generations=5, tournament_size=2))
    assert in_band(result.best.genome, tier, cfg)
    assert all(4e6 <= p <= 5e6 for _, _, p in result.history)


def test_exhaustive_examples(cfg, micro_tier, point_tier):
    assert exhaustive_search(micro_tier, cfg).genome == ArchGenome(128, 4, 4, 2)
    assert exhaustive_search(point_tier, cfg).genome == ArchGenome(192, 4, 4, 2)
    with pytest.raises(InfeasibleBandError):
        exhaustive_search(micro_tier.with_band(1e12, 2e12), cfg)


@pytest.mark.parametrize("name", ["tiny", "small", "base"])
def test_exhaustive_matches_brute_force(name, cfg):
    assert exhaustive_search(TIERS[name], cfg).genome == brute_force_best(TIERS[name], cfg)


def test_exhaustive_refuses_huge_grid(cfg):
    big = SearchSpaceTier("big", (8, 8000, 8), (1, 100, 1), (1, 1, 1), (1, 100, 1))
    with pytest.raises(ValueError, match="refusing"):
        exhaustive_search(big, cfg)


def test_tie_break_prefers_fewer_params_then_smallest(cfg):
    a = Candidate(ArchGenome(256, 4, 4, 4), 10, 100)
    b = Candidate(ArchGenome(192, 4, 4, 4), 10, 200)
    c = Candidate(ArchGenome(192, 4, 4, 3), 10, 100)
    assert min([a, b, c], key=Candidate.rank_key) == c


def test_result_serialisation(cfg, micro_tier):
    result = exhaustive_result(micro_tier, cfg)
    rec = result.best_record()
    assert list(rec)[:5] == ["tier", "embed_dim", "mlp_ratio", "num_heads", "depth"]
    assert result.history_csv().splitlines()[0] == "generation,best_score,best_params"
