"""Exit criteria, one check per criterion; outcomes are summarised at the end of the run.

Run alone with ``pytest tests/test_acceptance.py``.
"""

import itertools
import math
import time

import numpy as np
import pytest

from spikenas import cli
from spikenas.cost_model import flops_mlp, flops_sa, flops_snn, param_count
from spikenas.evo_search import SearchConfig, exhaustive_search, run_search
from spikenas.genome import TIERS, ArchGenome, RunConfig, SearchSpaceTier, sample
from spikenas.rank_stats import correlate, kendall_tau, sample_genomes, spearman_rho, synthetic_samples
from spikenas.snn_sim import LifParams, LifState, heaviside, lif_step, verify_flops

criterion = pytest.mark.criterion


# -- 1 ------------------------------------------------------------------------------

@criterion(1, "formula fidelity (exact integers)")
def test_formula_fidelity():
    t0 = time.perf_counter()
    assert flops_sa(1, 64, 192) == 5_505_024
    assert flops_mlp(1, 64, 192, 768) == 18_874_368
    assert flops_snn(ArchGenome(256, 4, 4, 4), RunConfig(timesteps=4)).snn_total == 687_865_856
    assert time.perf_counter() - t0 < 0.01


# -- 2 ------------------------------------------------------------------------------

@criterion(2, "parameter counts within 5% of 4.15M / 11.32M / 29.68M")
@pytest.mark.parametrize("genome,reported", [
    (ArchGenome(256, 4, 4, 4), 4.15e6),    # Spikformer-4-256
    (ArchGenome(384, 4, 8, 5), 11.32e6),   # Spikformer-5-384
    (ArchGenome(512, 4, 8, 8), 29.68e6),   # Spikformer-8-512
])
def test_parameter_calibration(genome, reported):
    total = param_count(genome, RunConfig()).total
    print(f"{genome}: {total} vs {reported:.0f} ({total / reported - 1:+.2%})")
    assert abs(total / reported - 1) <= 0.05


# -- 3 ------------------------------------------------------------------------------

@pytest.mark.slow
@criterion(3, "simulator MAC identities on 50 random genomes, T=4, n=64")
def test_mac_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    names = list(itertools.islice(itertools.cycle(["tiny", "small", "base"]), 50))
    for i, name in enumerate(names):
        g = sample(TIERS[name], rng)
        cfg = RunConfig(timesteps=4, image_size=(32, 32), seed=i)
        report = verify_flops(g, cfg)
        mlp, sa = report.identities
        assert mlp.lhs == 4 * flops_mlp(g.depth, 64, g.embed_dim, g.hidden_dim), (name, g)
        assert sa.lhs == 2 * 4 * flops_sa(g.depth, 64, g.embed_dim), (name, g)
        assert report.passed
    elapsed = time.perf_counter() - t0
    print(f"50 genomes verified in {elapsed:.1f}s")
    assert elapsed < 300


# -- 4 ------------------------------------------------------------------------------

MICRO = SearchSpaceTier("micro", (64, 128, 64), (3, 4, 1), (4, 4, 4), (1, 2, 1))

_search_elapsed = []


@pytest.mark.slow
@criterion(4, "evolutionary search matches exhaustive optimum in >= 95/100 trials")
@pytest.mark.parametrize("tier", [MICRO, TIERS["tiny"], TIERS["small"], TIERS["base"]], ids=lambda t: t.name)
def test_search_oracle_equivalence(tier):
    assert tier.grid_size <= 4096
    cfg = RunConfig()
    t0 = time.perf_counter()
    optimum = exhaustive_search(tier, cfg)
    lo, hi = tier.param_band
    hits = 0
    for seed in range(100):
        result = run_search(tier, cfg, SearchConfig(seed=seed))
        assert lo <= result.best.params <= hi
        hits += result.best.score == optimum.score
    _search_elapsed.append(time.perf_counter() - t0)
    print(f"{tier.name}: {hits}/100 hit optimum {optimum.genome}, {_search_elapsed[-1]:.1f}s")
    assert hits >= 95
    # four tiers share the two-minute budget
    assert sum(_search_elapsed) < 120


# -- 5 ------------------------------------------------------------------------------

@criterion(5, "LIF reset identity, binarity and threshold boundary over 1e5 vectors")
def test_lif_dynamics():
    rng = np.random.default_rng(5)
    violations = 0
    for _ in range(100_000):
        n = int(rng.integers(1, 33))
        p = LifParams(tau=float(rng.uniform(0.5, 8)), v_th=float(rng.uniform(-1, 2)),
                      v_reset=float(rng.uniform(-1, 0.5)))
        v = rng.normal(0, 2, n)
        x = rng.normal(0, 3, n)
        h = v + (x - (v - p.v_reset)) / p.tau
        s, new = lif_step(LifState(v), x, p)
        violations += not np.all((s == 0) | (s == 1))
        violations += not np.array_equal(s, (h >= p.v_th).astype(float))
        violations += not np.array_equal(new.v[s == 1], np.full(int(s.sum()), p.v_reset))
        violations += not np.array_equal(new.v[s == 0], h[s == 0])
    # exact boundary: with V_prev = V_reset = 0 and tau = 2, X = 2 V_th gives H == V_th
    for v_th in (0.25, 0.5, 1.0, 1.5, 3.0):
        s, new = lif_step(LifState(np.zeros(1)), np.array([2 * v_th]), LifParams(2.0, v_th, 0.0))
        violations += not (s[0] == 1 and new.v[0] == 0.0)
    violations += heaviside(0.0) != 1
    assert violations == 0


# -- 6 ------------------------------------------------------------------------------

def _kendall_pairs(xs, ys):
    conc = disc = tx = ty = 0
    for i, j in itertools.combinations(range(len(xs)), 2):
        dx, dy = xs[i] - xs[j], ys[i] - ys[j]
        tx += dx == 0
        ty += dy == 0
        if dx and dy:
            conc += dx * dy > 0
            disc += dx * dy < 0
    n0 = len(xs) * (len(xs) - 1) // 2
    return (conc - disc) / math.sqrt((n0 - tx) * (n0 - ty))


def _spearman_ranks(xs, ys):
    def ranks(v):
        return [1 + sum(w < a for w in v) + (sum(w == a for w in v) - 1) / 2 for a in v]

    rx, ry = ranks(xs), ranks(ys)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    return num / math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))


@criterion(6, "kendall/spearman match brute-force references to 1e-12 on 1000 tied lists")
def test_correlation_oracles():
    rng = np.random.default_rng(6)
    checked = worst = 0
    while checked < 1000:
        n = int(rng.integers(2, 31))
        levels = int(rng.integers(2, 8))  # few levels -> plenty of ties
        xs = rng.integers(0, levels, n).tolist()
        ys = rng.integers(0, levels, n).tolist()
        if len(set(xs)) < 2 or len(set(ys)) < 2:
            continue
        pairs = list(zip(xs, ys))
        worst = max(worst, abs(kendall_tau(pairs) - _kendall_pairs(xs, ys)),
                    abs(spearman_rho(pairs) - _spearman_ranks(xs, ys)))
        checked += 1
    print(f"max abs deviation {worst:.3g}")
    assert worst <= 1e-12


# -- 7 ------------------------------------------------------------------------------

@criterion(7, "monotone invariance and synthetic FLOPs-accuracy correlation")
def test_monotone_invariance():
    cfg = RunConfig()
    rng = np.random.default_rng(70)
    for _ in range(50):
        genomes = sample_genomes(TIERS["small"], cfg, 40, rng, in_band_only=False)
        samples = synthetic_samples(genomes, cfg, noise=3.0, rng=rng)
        pairs = [(s.score, s.accuracy) for s in samples]
        k, r = kendall_tau(pairs), spearman_rho(pairs)
        # attention counted at half its dense MACs, logs, and a cubic are all increasing
        for f in (lambda x: 2 * x, math.log, lambda x: (x / 1e9) ** 3 + 1):
            moved = [(f(x), y) for x, y in pairs]
            assert kendall_tau(moved) == pytest.approx(k, abs=1e-12)
            assert spearman_rho(moved) == pytest.approx(r, abs=1e-12)


# accuracy noise in percentage points around a 60-95% log-FLOPs curve
NOISE_LEVELS = (1.0, 2.0, 3.0)


@criterion(7, "monotone invariance and synthetic FLOPs-accuracy correlation")
@pytest.mark.parametrize("noise", NOISE_LEVELS)
def test_synthetic_correlation(noise):
    cfg = RunConfig()
    rng = np.random.default_rng(int(noise * 100))
    # 100 in-band architectures from the small space
    genomes = sample_genomes(TIERS["small"], cfg, 100, rng)
    report = correlate(synthetic_samples(genomes, cfg, noise=noise, rng=rng))
    print(f"noise {noise}: kendall {report.kendall:.3f} spearman {report.spearman:.3f}")
    assert report.kendall >= 0.6
    assert report.spearman >= 0.8


# -- 8 ------------------------------------------------------------------------------

@criterion(8, "search output files byte-identical across reruns")
def test_search_determinism(tmp_path):
    argv = ["search", "--tier", "tiny", "--seed", "42"]
    assert cli.main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(argv + ["--out", str(tmp_path / "b")]) == 0
    for name in ("best.json", "history.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
