"""``spikenas`` command line: sample, score, search, exhaustive, verify, correlate.

Every command first prints a ``config:`` line with the fully resolved
settings so a run can be reproduced from its own output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import cost_model, evo_search, rank_stats, snn_sim
from .genome import (GENES, TIERS, ArchGenome, InvalidGenomeError, RunConfig, genomes_to_csv,
                     load_tier, validate)

EXIT_OK = 0
EXIT_INVALID = 3
EXIT_INFEASIBLE = 4
EXIT_VERIFY_FAILED = 5
EXIT_IO = 6


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _common(p: argparse.ArgumentParser, tier_default=None) -> None:
    p.add_argument("--tier", choices=sorted(TIERS), default=tier_default)
    p.add_argument("--tier-file", type=Path, help="JSON tier with (low, high, step) ranges and param_band")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timesteps", type=int, default=4)
    p.add_argument("--image-size", type=int, nargs=2, metavar=("H", "W"), default=(32, 32))
    p.add_argument("--in-channels", type=int, default=3)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--out", type=Path)


def _genome_args(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--embed", type=int, required=required)
    p.add_argument("--ratio", type=int, required=required)
    p.add_argument("--heads", type=int, required=required)
    p.add_argument("--depth", type=int, required=required)


def _search_args(p: argparse.ArgumentParser) -> None:
    d = evo_search.SearchConfig()
    p.add_argument("--population", type=int, default=d.population_size)
    p.add_argument("--generations", type=int, default=d.generations)
    p.add_argument("--tournament", type=int, default=d.tournament_size)
    p.add_argument("--mutation-prob", type=float, default=d.mutation_prob)
    p.add_argument("--crossover-prob", type=float, default=d.crossover_prob)
    p.add_argument("--max-resamples", type=int, default=d.max_rejection_resamples)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spikenas", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw random genomes from a tier")
    _common(p, "tiny")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--any-params", action="store_true", help="do not restrict to the tier's param band")

    p = sub.add_parser("score", help="FLOPs metric and parameter count of one genome")
    _common(p)
    _genome_args(p, required=True)

    p = sub.add_parser("search", help="evolutionary search over a tier")
    _common(p, "tiny")
    _search_args(p)
    p.add_argument("--exhaustive", action="store_true", help="enumerate the grid instead")

    p = sub.add_parser("exhaustive", help="enumerate every grid point of a tier")
    _common(p, "tiny")

    p = sub.add_parser("verify", help="check simulator MAC counts against the FLOPs formulas")
    _common(p)
    _genome_args(p, required=False)
    p.add_argument("--count", type=int, default=1)

    p = sub.add_parser("correlate", help="Kendall/Spearman between scores and accuracies in a CSV")
    _common(p)
    p.add_argument("csv", type=Path)
    return parser


# -- helpers -------------------------------------------------------------------

def _run_config(a) -> RunConfig:
    return RunConfig(a.timesteps, tuple(a.image_size), a.in_channels, a.classes, a.seed)


def _tier(a):
    if a.tier_file is not None:
        try:
            return load_tier(a.tier_file)
        except OSError as exc:
            raise CliError(f"cannot read tier file: {exc}", EXIT_IO) from exc
        except json.JSONDecodeError as exc:
            raise CliError(f"tier file is not valid JSON: {exc}", EXIT_INVALID) from exc
    return TIERS[a.tier] if a.tier else None


def _echo_config(a, cfg: RunConfig, tier=None, **extra) -> None:
    resolved = {"command": a.command, "run": asdict(cfg)}
    if tier is not None:
        resolved["tier"] = tier.to_dict()
    resolved.update(extra)
    print("config: " + json.dumps(resolved, sort_keys=True))


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def _genome_from_args(a, tier):
    g = ArchGenome(a.embed, a.ratio, a.heads, a.depth)
    if tier is not None:
        verdict = validate(g, tier)
        if not verdict:
            raise InvalidGenomeError(str(verdict))
    elif g.embed_dim % g.num_heads:
        raise InvalidGenomeError("embed_dim not divisible by num_heads")
    return g


# -- commands ------------------------------------------------------------------

def cmd_sample(a) -> int:
    cfg, tier = _run_config(a), _tier(a)
    _echo_config(a, cfg, tier, count=a.count, in_band_only=not a.any_params)
    rng = np.random.default_rng(a.seed)
    genomes = rank_stats.sample_genomes(tier, cfg, a.count, rng, in_band_only=not a.any_params)
    text = genomes_to_csv([(tier.name, g) for g in genomes])
    print(text, end="")
    if a.out:
        _write(a.out, text)
    return EXIT_OK


def cmd_score(a) -> int:
    cfg, tier = _run_config(a), _tier(a)
    _echo_config(a, cfg, tier)
    g = _genome_from_args(a, tier)
    f = cost_model.flops_snn(g, cfg)
    pc = cost_model.param_count(g, cfg)
    print(f"genome {g}  (embed_dim, mlp_ratio, num_heads, depth)")
    print(f"seq_len {cfg.seq_len}  timesteps {cfg.timesteps}")
    print(f"sa_flops {f.sa_flops}")
    print(f"mlp_flops {f.mlp_flops}")
    print(f"ann_total {f.ann_total}")
    print(f"snn_total {f.snn_total}")
    print(f"block_params {pc.block_params}")
    print(f"spe_params {pc.spe_params}")
    print(f"head_params {pc.head_params}")
    print(f"total_params {pc.total}")
    if tier is not None:
        print(f"in_band {cost_model.in_band(g, tier, cfg)}")
    if a.out:
        row = cost_model.score_row(g, cfg)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cost_model.SCORE_COLUMNS)
        w.writerow([row[c] for c in cost_model.SCORE_COLUMNS])
        _write(a.out, buf.getvalue())
    return EXIT_OK


def _report_result(a, result: evo_search.SearchResult) -> int:
    b = result.best
    print(f"best {b.genome}  score {b.score}  params {b.params}  evaluated {result.evaluated_count}")
    if a.out:
        _write(a.out / "best.json", result.best_json())
        _write(a.out / "history.csv", result.history_csv())
    return EXIT_OK


def cmd_search(a) -> int:
    if a.exhaustive:
        return cmd_exhaustive(a)
    cfg, tier = _run_config(a), _tier(a)
    scfg = evo_search.SearchConfig(a.population, a.generations, a.tournament, a.mutation_prob,
                                   a.crossover_prob, a.max_resamples, a.seed)
    _echo_config(a, cfg, tier, search=asdict(scfg))
    return _report_result(a, evo_search.run_search(tier, cfg, scfg))


def cmd_exhaustive(a) -> int:
    cfg, tier = _run_config(a), _tier(a)
    _echo_config(a, cfg, tier, mode="exhaustive")
    return _report_result(a, evo_search.exhaustive_result(tier, cfg))


def cmd_verify(a) -> int:
    cfg, tier = _run_config(a), _tier(a)
    given = [a.embed, a.ratio, a.heads, a.depth]
    if all(v is not None for v in given):
        genomes = [_genome_from_args(a, tier)]
    elif any(v is not None for v in given):
        raise InvalidGenomeError("--embed, --ratio, --heads and --depth must be given together")
    elif tier is not None:
        genomes = rank_stats.sample_genomes(tier, cfg, a.count, np.random.default_rng(a.seed),
                                            in_band_only=False)
    else:
        raise InvalidGenomeError("verify needs a genome or a tier")
    _echo_config(a, cfg, tier, count=len(genomes))
    lines, failed = [], 0
    for g in genomes:
        report = snn_sim.verify_flops(g, cfg)
        status = "PASS" if report.passed else "FAIL " + ",".join(report.failed)
        print(f"genome {g} {status}")
        for ident in report.identities:
            print("  " + ident.line())
            lines.append(f"{g} {ident.line()}")
        failed += not report.passed
    print(f"{len(genomes) - failed}/{len(genomes)} passed")
    if a.out:
        _write(a.out, "\n".join(lines) + "\n")
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def read_scored_csv(path: Path, cfg: RunConfig) -> list[rank_stats.ScoredSample]:
    """Rows of ``tier, embed_dim, mlp_ratio, num_heads, depth, accuracy[, score]``."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in GENES + ("accuracy",) if c not in (reader.fieldnames or [])]
    if missing:
        raise CliError(f"malformed CSV: missing columns {missing}", EXIT_INVALID)
    samples = []
    for lineno, row in enumerate(reader, start=2):
        try:
            g = ArchGenome(*(int(row[c]) for c in GENES))
            score = float(row["score"]) if row.get("score") not in (None, "") \
                else cost_model.flops_snn(g, cfg).snn_total
            samples.append(rank_stats.ScoredSample(g, score, float(row["accuracy"])))
        except (TypeError, ValueError) as exc:
            raise CliError(f"malformed CSV line {lineno}: {exc}", EXIT_INVALID) from exc
    return samples


def cmd_correlate(a) -> int:
    cfg = _run_config(a)
    _echo_config(a, cfg, None, csv=str(a.csv))
    samples = read_scored_csv(a.csv, cfg)
    if len(samples) < 2:
        raise CliError(f"need >= 2 samples, got {len(samples)}", EXIT_INVALID)
    report = rank_stats.correlate(samples)
    print(f"kendall {report.kendall!r}")
    print(f"spearman {report.spearman!r}")
    print(f"n {report.n}")
    out = a.out or a.csv.with_suffix(".correlation.json")
    _write(out, json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "score": cmd_score,
    "search": cmd_search,
    "exhaustive": cmd_exhaustive,
    "verify": cmd_verify,
    "correlate": cmd_correlate,
}


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        return COMMANDS[a.command](a)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except evo_search.InfeasibleBandError as exc:
        print(f"error: infeasible band: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except rank_stats.DegenerateDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InvalidGenomeError as exc:
        print(f"error: invalid genome: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
