"""Tie-breaking evaluation protocols and metric aggregation.

Every protocol's rank is derived arithmetically from one per-query tie
profile (strictly-better count, tied count), so no candidate list is ever
physically sorted and results cannot depend on any sort's tie order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .data import SIDES, Dataset, Query, all_candidates, filtered_candidates
from .scorers import Scorer

REPORT_SCHEMA_VERSION = 1

PROTOCOLS = ("top", "bottom", "random")

_SPLIT_CODE = {"train": 0, "valid": 1, "test": 2}
_SIDE_CODE = {"head": 0, "tail": 1}
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TieProfile:
    """Per-query counts from which every protocol's rank follows.

    strictly_better: negatives scoring strictly higher than the evaluated
    triple. tied: negatives scoring exactly equal. total_candidates: size of
    the candidate set including the evaluated triple.
    """

    strictly_better: int
    tied: int
    total_candidates: int

    def __post_init__(self):
        if min(self.strictly_better, self.tied, self.total_candidates) < 0:
            raise ValueError("tie profile counts must be non-negative")
        if self.strictly_better + self.tied > self.total_candidates - 1:
            raise ValueError("tie profile counts exceed candidate set size")


def tie_profile(scores: Sequence[float], evaluated_index: int, tol: float = 0.0) -> TieProfile:
    """Count strictly-better and tied candidates against the evaluated score.

    Comparison is exact floating-point by default; ``tol`` widens the tie
    band for diagnostics only. NaN scores are rejected outright since NaN
    comparisons would silently corrupt ranks.
    """
    arr = np.asarray(scores, dtype=np.float64)
    if np.isnan(arr).any():
        raise ValueError("NaN in candidate scores")
    if not 0 <= evaluated_index < arr.shape[0]:
        raise IndexError(f"evaluated_index {evaluated_index} out of range")
    target = arr[evaluated_index]
    if tol == 0.0:
        strictly_better = int(np.sum(arr > target))
        tied = int(np.sum(arr == target)) - 1
    else:
        strictly_better = int(np.sum(arr > target + tol))
        tied = int(np.sum(np.abs(arr - target) <= tol)) - 1
    return TieProfile(strictly_better, tied, int(arr.shape[0]))


def rank_top(profile: TieProfile) -> int:
    """Evaluated triple placed before every equal-scored negative."""
    return profile.strictly_better + 1


def rank_bottom(profile: TieProfile) -> int:
    """Evaluated triple placed after every equal-scored negative."""
    return profile.strictly_better + profile.tied + 1


def rank_random(profile: TieProfile, rng: np.random.Generator) -> int:
    """Evaluated triple placed uniformly among the equal-scored block."""
    offset = int(rng.integers(0, profile.tied + 1)) if profile.tied else 0
    return profile.strictly_better + 1 + offset


def query_rng(seed: int, split: str, query_index: int, side: str) -> np.random.Generator:
    """Counter-based generator keyed by (seed, split, query, side).

    Each query gets its own keyed Philox stream, so RANDOM draws do not
    depend on evaluation order or thread count.
    """
    lane = (query_index << 3) | (_SIDE_CODE[side] << 2) | _SPLIT_CODE[split]
    key = np.array([seed & _MASK64, lane & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class Metrics:
    mrr: float
    mr: float
    hits: dict[int, float]
    n_queries: int

    def to_jsonable(self) -> dict:
        return {
            "mrr": self.mrr,
            "mr": self.mr,
            "hits": {str(k): v for k, v in sorted(self.hits.items())},
            "n_queries": self.n_queries,
        }


def aggregate(ranks: Sequence[int], ks: Iterable[int] = (1, 3, 10)) -> Metrics:
    """MRR, MR and Hits@k over a non-empty list of 1-based ranks."""
    arr = np.asarray(ranks, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot aggregate an empty rank list")
    if (arr < 1).any():
        raise ValueError("ranks must be positive")
    return Metrics(
        mrr=float(np.mean(1.0 / arr)),
        mr=float(np.mean(arr)),
        hits={int(k): float(np.mean(arr <= k)) for k in ks},
        n_queries=int(arr.size),
    )


@dataclass(frozen=True)
class EvalConfig:
    protocols: tuple[str, ...] = PROTOCOLS
    sides: tuple[str, ...] = SIDES
    ks: tuple[int, ...] = (1, 3, 10)
    seed: int = 0
    n_seeds: int = 5
    split: str = "test"
    filtered: bool = True
    tie_tolerance: float = 0.0
    include_per_query: bool = False
    threads: int | None = None  # None: KG_EVAL_THREADS env var, else 1

    def random_seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.n_seeds)]

    def to_jsonable(self) -> dict:
        # Thread count is an execution detail and deliberately not part of
        # the report: reports must be byte-identical for any worker count.
        return {
            "protocols": list(self.protocols),
            "sides": list(self.sides),
            "ks": list(self.ks),
            "seed": self.seed,
            "n_seeds": self.n_seeds,
            "split": self.split,
            "filtered": self.filtered,
            "tie_tolerance": self.tie_tolerance,
        }


def resolve_threads(explicit: int | None = None) -> int:
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get("KG_EVAL_THREADS")
    return max(1, int(env)) if env else 1


@dataclass(frozen=True)
class QueryRecord:
    """Tie profile of one (triple, side) query, tagged for seeding."""

    index: int  # triple position within the split
    query: Query
    profile: TieProfile


def collect_profiles(
    dataset: Dataset,
    scorer: Scorer,
    split: str = "test",
    sides: Sequence[str] = SIDES,
    filtered: bool = True,
    tol: float = 0.0,
    threads: int | None = None,
) -> list[QueryRecord]:
    """Score every query of a split and reduce each to its TieProfile.

    Shared by evaluate() and the tie diagnostics so both necessarily agree.
    Queries may fan out across worker threads; records come back in query
    order regardless of worker count.
    """
    triples = dataset.split(split)
    jobs = [(i, Query(t, side)) for i, t in enumerate(triples) for side in sides]

    def run(job: tuple[int, Query]) -> QueryRecord:
        index, query = job
        cands = filtered_candidates(dataset, query) if filtered else all_candidates(dataset)
        scores = scorer.score_batch(query, cands)
        evaluated = int(np.searchsorted(cands, query.answer))
        try:
            profile = tie_profile(scores, evaluated, tol=tol)
        except ValueError as err:
            raise ValueError(f"query {query.triple} side={query.side}: {err}") from err
        return QueryRecord(index, query, profile)

    n_workers = resolve_threads(threads)
    if n_workers == 1 or len(jobs) < 2:
        return [run(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(run, jobs))


def tie_summary(records: Sequence[QueryRecord]) -> dict:
    tied = np.asarray([r.profile.tied for r in records], dtype=np.int64)
    histogram: dict[int, int] = {}
    for value in tied.tolist():
        histogram[value] = histogram.get(value, 0) + 1
    return {
        "mean_tied": float(tied.mean()) if tied.size else 0.0,
        "max_tied": int(tied.max()) if tied.size else 0,
        "fraction_queries_with_ties": float(np.mean(tied > 0)) if tied.size else 0.0,
        "histogram": {str(k): histogram[k] for k in sorted(histogram)},
    }


@dataclass
class EvalReport:
    """Aggregated evaluation results plus tie statistics and seed metadata."""

    config: EvalConfig
    dataset_info: dict
    metrics: dict
    ties: dict
    per_query: list[dict] | None = None
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_jsonable(self) -> dict:
        obj = {
            "schema_version": self.schema_version,
            "config": self.config.to_jsonable(),
            "dataset": self.dataset_info,
            "metrics": self.metrics,
            "ties": self.ties,
        }
        if self.per_query is not None:
            obj["per_query"] = self.per_query
        return obj

    def to_json(self) -> str:
        import json

        return json.dumps(self.to_jsonable(), sort_keys=True, indent=2)


def _metrics_spread(per_seed: list[Metrics], ks: Sequence[int]) -> tuple[dict, dict]:
    mean: dict = {}
    std: dict = {}
    for name, values in (
        ("mrr", [m.mrr for m in per_seed]),
        ("mr", [m.mr for m in per_seed]),
    ):
        mean[name] = float(np.mean(values))
        std[name] = float(np.std(values))  # population std over seeds
    mean["hits"] = {}
    std["hits"] = {}
    for k in ks:
        values = [m.hits[k] for m in per_seed]
        mean["hits"][str(k)] = float(np.mean(values))
        std["hits"][str(k)] = float(np.std(values))
    return mean, std


def evaluate(dataset: Dataset, scorer: Scorer, config: EvalConfig | None = None) -> EvalReport:
    """Rank every query of the configured split under each protocol.

    One tie profile per query feeds all protocols; RANDOM is drawn once per
    (query, seed) and that draw feeds every metric. With a fixed seed the
    report is byte-identical for any thread count.
    """
    config = config or EvalConfig()
    unknown = [p for p in config.protocols if p not in PROTOCOLS]
    if unknown:
        raise ValueError(f"unknown protocols {unknown}")
    records = collect_profiles(
        dataset,
        scorer,
        split=config.split,
        sides=config.sides,
        filtered=config.filtered,
        tol=config.tie_tolerance,
        threads=config.threads,
    )
    if not records:
        raise ValueError(f"split {config.split!r} has no queries")

    metrics: dict = {}
    ranks_by_protocol: dict[str, list[int]] = {}
    if "top" in config.protocols:
        ranks_by_protocol["top"] = [rank_top(r.profile) for r in records]
        metrics["top"] = aggregate(ranks_by_protocol["top"], config.ks).to_jsonable()
    if "bottom" in config.protocols:
        ranks_by_protocol["bottom"] = [rank_bottom(r.profile) for r in records]
        metrics["bottom"] = aggregate(ranks_by_protocol["bottom"], config.ks).to_jsonable()

    random_ranks: dict[int, list[int]] = {}
    if "random" in config.protocols:
        per_seed_metrics: list[Metrics] = []
        per_seed_out = []
        for s in config.random_seeds():
            ranks = [
                rank_random(r.profile, query_rng(s, config.split, r.index, r.query.side))
                for r in records
            ]
            random_ranks[s] = ranks
            m = aggregate(ranks, config.ks)
            per_seed_metrics.append(m)
            per_seed_out.append({"seed": s, **m.to_jsonable()})
        mean, std = _metrics_spread(per_seed_metrics, config.ks)
        metrics["random"] = {
            "seeds": config.random_seeds(),
            "per_seed": per_seed_out,
            "mean": mean,
            "std": std,
        }

    per_query = None
    if config.include_per_query:
        per_query = []
        for pos, rec in enumerate(records):
            entry = {
                "index": rec.index,
                "side": rec.query.side,
                "triple": list(rec.query.triple),
                "profile": {
                    "strictly_better": rec.profile.strictly_better,
                    "tied": rec.profile.tied,
                    "total_candidates": rec.profile.total_candidates,
                },
                "ranks": {},
            }
            for proto, ranks in ranks_by_protocol.items():
                entry["ranks"][proto] = ranks[pos]
            if random_ranks:
                entry["ranks"]["random"] = {str(s): rs[pos] for s, rs in random_ranks.items()}
            per_query.append(entry)

    dataset_info = {
        "n_entities": dataset.n_entities,
        "n_relations": dataset.n_relations,
        "split_triples": len(dataset.split(config.split)),
        "n_queries": len(records),
    }
    return EvalReport(
        config=config,
        dataset_info=dataset_info,
        metrics=metrics,
        ties=tie_summary(records),
        per_query=per_query,
    )
