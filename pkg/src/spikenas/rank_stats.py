"""Kendall tau-b and Spearman rho between metric scores and accuracies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cost_model import flops_snn, in_band
from .genome import ArchGenome, RunConfig, SearchSpaceTier, sample


class DegenerateDataError(ValueError):
    """Too few samples, or a variable with no spread, so the coefficient is undefined."""


def _split(pairs) -> tuple[list[float], list[float]]:
    pairs = list(pairs)
    if len(pairs) < 2:
        raise DegenerateDataError(f"need >= 2 samples, got {len(pairs)}")
    xs, ys = zip(*pairs)
    return list(map(float, xs)), list(map(float, ys))


def _tied_pairs(sorted_vals: Sequence[float]) -> int:
    total, run = 0, 1
    for i in range(1, len(sorted_vals) + 1):
        if i < len(sorted_vals) and sorted_vals[i] == sorted_vals[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    return total


def _count_inversions(seq: list[float]) -> int:
    """Strict inversions (i < j with seq[i] > seq[j]) by merge sort; sorts ``seq`` in place."""
    n = len(seq)
    if n < 2:
        return 0
    buf = seq[:]
    swaps = 0
    width = 1
    src, dst = seq, buf
    while width < n:
        for lo in range(0, n, 2 * width):
            mid, hi = min(lo + width, n), min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    swaps += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            dst[k:hi] = src[i:mid] if i < mid else src[j:hi]
        src, dst = dst, src
        width *= 2
    if src is not seq:
        seq[:] = src
    return swaps


def kendall_tau(pairs: Iterable[tuple[float, float]]) -> float:
    """Kendall tau-b in O(n log n) (Knight's algorithm).

    Sort by (x, y); the number of discordant pairs is the inversion count of
    the resulting y sequence, and ties are counted from sorted runs.
    """
    xs, ys = _split(pairs)
    n = len(xs)
    n0 = n * (n - 1) // 2
    order = sorted(range(n), key=lambda i: (xs[i], ys[i]))
    x_sorted = [xs[i] for i in order]
    y_seq = [ys[i] for i in order]

    t_x = _tied_pairs(x_sorted)
    # pairs tied in both x and y
    t_xy, run = 0, 1
    for i in range(1, n + 1):
        if i < n and x_sorted[i] == x_sorted[i - 1] and y_seq[i] == y_seq[i - 1]:
            run += 1
        else:
            t_xy += run * (run - 1) // 2
            run = 1

    discordant = _count_inversions(y_seq)  # y_seq now sorted
    t_y = _tied_pairs(y_seq)
    if n0 == t_x or n0 == t_y:
        raise DegenerateDataError("kendall tau undefined: all x or all y values are tied")
    concordant_minus_discordant = n0 - t_x - t_y + t_xy - 2 * discordant
    tau = concordant_minus_discordant / math.sqrt((n0 - t_x) * (n0 - t_y))
    return max(-1.0, min(1.0, tau))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks, tied values share the mean of the ranks they span."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(len(v))
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman_rho(pairs: Iterable[tuple[float, float]]) -> float:
    xs, ys = _split(pairs)
    rx, ry = average_ranks(xs), average_ranks(ys)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DegenerateDataError("spearman rho undefined: zero rank variance")
    rho = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


@dataclass(frozen=True)
class ScoredSample:
    genome: ArchGenome
    score: float
    accuracy: float

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 100.0:
            raise ValueError(f"accuracy must be a percentage in [0, 100], got {self.accuracy}")


@dataclass(frozen=True)
class CorrelationReport:
    kendall: float
    spearman: float
    n: int

    def to_dict(self) -> dict:
        return {"kendall": self.kendall, "spearman": self.spearman, "n": self.n}


def correlate(samples: Sequence[ScoredSample]) -> CorrelationReport:
    pairs = [(s.score, s.accuracy) for s in samples]
    return CorrelationReport(kendall_tau(pairs), spearman_rho(pairs), len(pairs))


def synthetic_samples(genomes: Sequence[ArchGenome], cfg: RunConfig, noise: float,
                      rng: np.random.Generator, acc_range=(60.0, 95.0)) -> list[ScoredSample]:
    """Accuracies as an increasing function of log-FLOPs plus Gaussian noise.

    Stand-in for trained-model accuracies: ``noise`` is the standard deviation
    in accuracy points; the noiseless curve spans ``acc_range`` over the set.
    """
    scores = np.array([flops_snn(g, cfg).snn_total for g in genomes], dtype=float)
    logs = np.log(scores)
    span = logs.max() - logs.min()
    frac = (logs - logs.min()) / span if span > 0 else np.zeros_like(logs)
    lo, hi = acc_range
    acc = lo + (hi - lo) * frac + rng.normal(0.0, noise, size=len(genomes))
    acc = np.clip(acc, 0.0, 100.0)
    return [ScoredSample(g, float(s), float(a)) for g, s, a in zip(genomes, scores, acc)]


def sample_genomes(tier: SearchSpaceTier, cfg: RunConfig, count: int, rng: np.random.Generator,
                   in_band_only: bool = True, max_tries: int = 100_000) -> list[ArchGenome]:
    out = []
    for _ in range(max_tries):
        if len(out) == count:
            break
        g = sample(tier, rng)
        if not in_band_only or in_band(g, tier, cfg):
            out.append(g)
    if len(out) < count:
        raise ValueError(f"only {len(out)} of {count} genomes found in tier {tier.name}")
    return out
