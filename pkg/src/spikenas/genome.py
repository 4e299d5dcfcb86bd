"""Architecture genome, search-space tiers and the evolutionary operators.

A genome fixes the four global knobs of a Spiking Transformer: embedding
width, MLP expansion ratio, number of attention heads and number of blocks.
Tiers bound each knob to an arithmetic grid ``(low, high, step)`` and carry
the parameter band the search has to respect.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

GENES = ("embed_dim", "mlp_ratio", "num_heads", "depth")
CSV_COLUMNS = ("tier",) + GENES

# Spiking patch embedding halves the resolution twice.
SPE_DOWNSAMPLE = 4

# Bounded embed_dim resampling for custom tiers with non-divisible combinations.
MAX_REPAIR_TRIES = 16


class InvalidGenomeError(ValueError):
    """A genome or tier violates one of its structural constraints."""


@dataclass(frozen=True, order=True)
class ArchGenome:
    embed_dim: int
    mlp_ratio: int
    num_heads: int
    depth: int

    def __post_init__(self):
        for name in GENES:
            value = getattr(self, name)
            if type(value) is int and value >= 1:
                continue
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidGenomeError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise InvalidGenomeError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, int(value))

    @property
    def hidden_dim(self) -> int:
        return self.embed_dim * self.mlp_ratio

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.embed_dim, self.mlp_ratio, self.num_heads, self.depth)

    def replace(self, **changes) -> "ArchGenome":
        values = dict(zip(GENES, self.as_tuple()))
        values.update(changes)
        return ArchGenome(**values)

    def __str__(self):
        return "{%d, %d, %d, %d}" % self.as_tuple()


@dataclass(frozen=True)
class GeneRange:
    low: int
    high: int
    step: int

    def __post_init__(self):
        if self.low < 1 or self.step < 1:
            raise InvalidGenomeError(f"range {self.as_tuple()} needs low >= 1 and step >= 1")
        if self.low > self.high:
            raise InvalidGenomeError(f"range {self.as_tuple()} has low > high")
        if (self.high - self.low) % self.step:
            raise InvalidGenomeError(f"range {self.as_tuple()}: high - low not divisible by step")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.low, self.high, self.step)

    @cached_property
    def values(self) -> tuple[int, ...]:
        return tuple(range(self.low, self.high + 1, self.step))

    def __len__(self):
        return (self.high - self.low) // self.step + 1

    def __contains__(self, value) -> bool:
        return self.low <= value <= self.high and (value - self.low) % self.step == 0


def _as_range(r) -> GeneRange:
    return r if isinstance(r, GeneRange) else GeneRange(*(int(v) for v in r))


@dataclass(frozen=True)
class SearchSpaceTier:
    """Per-gene grids plus an inclusive parameter band ``[min, max]``."""

    name: str
    embed_range: GeneRange
    ratio_range: GeneRange
    head_range: GeneRange
    depth_range: GeneRange
    param_band: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        for attr in ("embed_range", "ratio_range", "head_range", "depth_range"):
            object.__setattr__(self, attr, _as_range(getattr(self, attr)))
        lo, hi = (float(v) for v in self.param_band)
        if not lo < hi:
            raise InvalidGenomeError(f"tier {self.name}: param band needs min < max, got {self.param_band}")
        object.__setattr__(self, "param_band", (lo, hi))

    @cached_property
    def _ranges(self) -> dict[str, GeneRange]:
        return {
            "embed_dim": self.embed_range,
            "mlp_ratio": self.ratio_range,
            "num_heads": self.head_range,
            "depth": self.depth_range,
        }

    def ranges(self) -> dict[str, GeneRange]:
        return dict(self._ranges)

    @property
    def grid_size(self) -> int:
        return math.prod(len(r) for r in self.ranges().values())

    def grid(self) -> Iterator[tuple[int, int, int, int]]:
        """Every gene combination in lexicographic order, divisible or not."""
        r = self.ranges()
        for e in r["embed_dim"].values:
            for m in r["mlp_ratio"].values:
                for h in r["num_heads"].values:
                    for d in r["depth"].values:
                        yield (e, m, h, d)

    def with_band(self, lo: float, hi: float) -> "SearchSpaceTier":
        return SearchSpaceTier(self.name, self.embed_range, self.ratio_range,
                               self.head_range, self.depth_range, (lo, hi))

    def to_dict(self) -> dict:
        lo, hi = self.param_band
        return {
            "name": self.name,
            "embed_range": list(self.embed_range.as_tuple()),
            "ratio_range": list(self.ratio_range.as_tuple()),
            "head_range": list(self.head_range.as_tuple()),
            "depth_range": list(self.depth_range.as_tuple()),
            "param_band": [_num(lo), None if math.isinf(hi) else _num(hi)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpaceTier":
        try:
            lo, hi = d.get("param_band", (0, None))
            return cls(
                name=str(d["name"]),
                embed_range=d["embed_range"],
                ratio_range=d["ratio_range"],
                head_range=d["head_range"],
                depth_range=d["depth_range"],
                param_band=(float(lo or 0), math.inf if hi is None else float(hi)),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidGenomeError(f"malformed tier record: {exc}") from exc


def _num(x: float):
    return int(x) if float(x).is_integer() else x


TIERS: dict[str, SearchSpaceTier] = {
    "tiny": SearchSpaceTier("tiny", (192, 384, 64), (3, 5, 1), (4, 8, 4), (1, 8, 1), (4.0e6, 5.0e6)),
    "small": SearchSpaceTier("small", (256, 512, 64), (3, 5, 1), (4, 8, 4), (2, 12, 1), (11.0e6, 15.0e6)),
    "base": SearchSpaceTier("base", (384, 768, 64), (3, 6, 1), (4, 8, 4), (4, 15, 1), (25.0e6, 35.0e6)),
}


def load_tier(path) -> SearchSpaceTier:
    with open(path) as fh:
        return SearchSpaceTier.from_dict(json.load(fh))


def save_tier(tier: SearchSpaceTier, path) -> None:
    Path(path).write_text(json.dumps(tier.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class RunConfig:
    timesteps: int = 4
    image_size: tuple[int, int] = (32, 32)
    in_channels: int = 3
    num_classes: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "image_size", tuple(int(v) for v in self.image_size))
        if self.timesteps < 1:
            raise InvalidGenomeError(f"timesteps must be >= 1, got {self.timesteps}")
        if len(self.image_size) != 2 or any(s < SPE_DOWNSAMPLE or s % SPE_DOWNSAMPLE for s in self.image_size):
            raise InvalidGenomeError(
                f"image_size {self.image_size} must be positive multiples of {SPE_DOWNSAMPLE}")
        if self.in_channels < 1 or self.num_classes < 1:
            raise InvalidGenomeError("in_channels and num_classes must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidGenomeError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    @property
    def seq_len(self) -> int:
        h, w = self.image_size
        return (h // SPE_DOWNSAMPLE) * (w // SPE_DOWNSAMPLE)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    violation: Optional[str] = None
    detail: str = field(default="", compare=False)

    def __bool__(self):
        return self.ok

    def __str__(self):
        return "valid" if self.ok else f"{self.violation}: {self.detail}"


def validate(g: ArchGenome, tier: SearchSpaceTier) -> Verdict:
    """Check grid membership gene by gene, then head divisibility.

    The first violated constraint wins, so an off-grid embed_dim is reported
    even when it also breaks divisibility.
    """
    for name, rng in tier._ranges.items():
        value = getattr(g, name)
        if value not in rng:
            return Verdict(False, f"{name} off grid",
                           f"{value} not in {rng.as_tuple()} of tier {tier.name}")
    if g.embed_dim % g.num_heads:
        return Verdict(False, "embed_dim not divisible by num_heads",
                       f"{g.embed_dim} % {g.num_heads} = {g.embed_dim % g.num_heads}")
    return Verdict(True)


def _repair(values: dict, tier: SearchSpaceTier, rng: np.random.Generator) -> ArchGenome:
    if values["embed_dim"] % values["num_heads"] == 0:
        return ArchGenome(**values)
    embeds = tier.embed_range.values
    for _ in range(MAX_REPAIR_TRIES):
        values["embed_dim"] = embeds[rng.integers(len(embeds))]
        if values["embed_dim"] % values["num_heads"] == 0:
            return ArchGenome(**values)
    raise InvalidGenomeError(
        f"no embed_dim divisible by num_heads={values['num_heads']} found in "
        f"{MAX_REPAIR_TRIES} resamples (tier {tier.name})")


def sample(tier: SearchSpaceTier, rng: np.random.Generator) -> ArchGenome:
    values = {}
    for name, r in tier._ranges.items():
        values[name] = r.low + r.step * int(rng.integers(len(r)))
    return _repair(values, tier, rng)


def mutate(g: ArchGenome, tier: SearchSpaceTier, per_gene_prob: float,
           rng: np.random.Generator) -> ArchGenome:
    if not 0.0 <= per_gene_prob <= 1.0:
        raise ValueError(f"per_gene_prob must lie in [0, 1], got {per_gene_prob}")
    values = dict(zip(GENES, g.as_tuple()))
    hits = rng.random(len(GENES)) < per_gene_prob
    for (name, r), hit in zip(tier._ranges.items(), hits):
        if not hit or len(r) < 2:
            continue
        # uniform over the other grid points: skip past the current index
        j = int(rng.integers(len(r) - 1))
        if j >= (values[name] - r.low) // r.step:
            j += 1
        values[name] = r.low + r.step * j
    return _repair(values, tier, rng)


def crossover(a: ArchGenome, b: ArchGenome, rng: np.random.Generator,
              tier: Optional[SearchSpaceTier] = None) -> ArchGenome:
    """Uniform gene-wise crossover.

    ``tier`` is only consulted when the child breaks head divisibility, which
    cannot happen on the built-in tiers.
    """
    picks = rng.random(len(GENES)) < 0.5
    values = {name: (va if take_a else vb)
              for name, va, vb, take_a in zip(GENES, a.as_tuple(), b.as_tuple(), picks)}
    if values["embed_dim"] % values["num_heads"] and tier is None:
        raise InvalidGenomeError("crossover child needs repair but no tier was given")
    return _repair(values, tier, rng)


# -- serialization -----------------------------------------------------------

def genome_record(g: ArchGenome, tier_name: str) -> dict:
    return {"tier": tier_name, **dict(zip(GENES, g.as_tuple()))}


def genome_from_record(rec: dict) -> tuple[str, ArchGenome]:
    try:
        return str(rec["tier"]), ArchGenome(*(int(rec[k]) for k in GENES))
    except KeyError as exc:
        raise InvalidGenomeError(f"genome record missing column {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidGenomeError):
            raise
        raise InvalidGenomeError(f"malformed genome record {rec!r}: {exc}") from exc


def genomes_to_csv(rows: list[tuple[str, ArchGenome]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for tier_name, g in rows:
        writer.writerow((tier_name,) + g.as_tuple())
    return buf.getvalue()


def genomes_from_csv(text: str) -> list[tuple[str, ArchGenome]]:
    return [genome_from_record(rec) for rec in csv.DictReader(io.StringIO(text))]
