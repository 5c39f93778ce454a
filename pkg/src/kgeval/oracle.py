"""Brute-force reference implementations used to validate the fast paths.

Everything here is deliberately naive: candidate membership is decided by
scanning the complete triple list, candidates are scored one at a time, and
ranks come from literally inserting the evaluated score into a sorted list.
Performance is irrelevant; these are only run on tiny graphs.
"""

from __future__ import annotations

import hashlib
import struct
from fractions import Fraction

import numpy as np

from .data import (
    Dataset,
    Query,
    Triple,
    Vocab,
    build_dataset,
    filtered_candidates,
)
from .protocols import (
    TieProfile,
    query_rng,
    rank_bottom,
    rank_random,
    rank_top,
    tie_profile,
)
from .scorers import Scorer


def oracle_filter(dataset: Dataset, query: Query) -> list[int]:
    """Filtered candidates by scanning the full triple list per entity."""
    known = dataset.train + dataset.valid + dataset.test
    h, r, t = query.triple
    out = []
    for e in range(dataset.n_entities):
        candidate = Triple(h, r, e) if query.side == "tail" else Triple(e, r, t)
        if e == query.answer or candidate not in known:
            out.append(e)
    return out


def _insertion_ranks(neg_scores: list[float], evaluated_score: float) -> list[int]:
    """All ranks reachable by inserting the evaluated score into the
    descending-sorted negatives, one per slot inside its tie block."""
    ordered = sorted(neg_scores, reverse=True)
    lo = 0
    while lo < len(ordered) and ordered[lo] > evaluated_score:
        lo += 1
    hi = lo
    while hi < len(ordered) and ordered[hi] == evaluated_score:
        hi += 1
    marker = object()
    ranks = []
    for pos in range(lo, hi + 1):
        placed: list = ordered[:pos] + [marker] + ordered[pos:]
        ranks.append(placed.index(marker) + 1)
    return ranks


def oracle_rank(
    dataset: Dataset, scorer: Scorer, query: Query, protocol: str
) -> dict[int, Fraction]:
    """Exact rank distribution for one query under a protocol.

    TOP and BOTTOM give point distributions; RANDOM enumerates every
    placement of the evaluated triple within its tie block.
    """
    candidates = oracle_filter(dataset, query)
    evaluated_score = float(scorer.score_batch(query, [query.answer])[0])
    neg_scores = [
        float(scorer.score_batch(query, [c])[0]) for c in candidates if c != query.answer
    ]
    ranks = _insertion_ranks(neg_scores, evaluated_score)
    if protocol == "top":
        return {ranks[0]: Fraction(1)}
    if protocol == "bottom":
        return {ranks[-1]: Fraction(1)}
    if protocol == "random":
        p = Fraction(1, len(ranks))
        return {rank: p for rank in ranks}
    raise ValueError(f"unknown protocol {protocol!r}")


def oracle_profile(dataset: Dataset, scorer: Scorer, query: Query) -> TieProfile:
    """Tie counts recomputed with per-candidate scoring and list scans."""
    candidates = oracle_filter(dataset, query)
    evaluated_score = float(scorer.score_batch(query, [query.answer])[0])
    neg_scores = [
        float(scorer.score_batch(query, [c])[0]) for c in candidates if c != query.answer
    ]
    better = sum(1 for s in neg_scores if s > evaluated_score)
    tied = sum(1 for s in neg_scores if s == evaluated_score)
    return TieProfile(better, tied, len(candidates))


class QuantizedHashScorer(Scorer):
    """Deterministic scorer with scores drawn from a small value set.

    Hash-based and stateless, so it is pure like any real scorer, but the
    coarse value set makes ties frequent; used by the randomized
    equivalence suites.
    """

    kind = "quantized_hash"

    def __init__(self, seed: int = 0, levels: int = 4):
        if levels < 1:
            raise ValueError("levels must be >= 1")
        self.seed = seed
        self.values = np.linspace(0.0, 1.0, levels)

    def score_triples(self, heads, relations, tails):
        out = np.empty(np.asarray(heads).shape, dtype=np.float64)
        flat = out.reshape(-1)
        for i, (h, r, t) in enumerate(
            zip(np.ravel(heads).tolist(), np.ravel(relations).tolist(), np.ravel(tails).tolist())
        ):
            digest = hashlib.blake2b(
                struct.pack("<qqqq", h, r, t, self.seed), digest_size=8
            ).digest()
            flat[i] = self.values[int.from_bytes(digest, "little") % self.values.size]
        return out


def random_tiny_dataset(rng: np.random.Generator) -> Dataset:
    """Small random KG with non-empty test split, duplicates allowed."""
    n_e = int(rng.integers(3, 13))
    n_r = int(rng.integers(1, 4))
    entities = Vocab()
    relations = Vocab()
    for i in range(n_e):
        entities.add(f"e{i}")
    for i in range(n_r):
        relations.add(f"r{i}")
    n_total = int(rng.integers(2, 3 * n_e + 1))
    triples = [
        Triple(int(rng.integers(0, n_e)), int(rng.integers(0, n_r)), int(rng.integers(0, n_e)))
        for _ in range(n_total)
    ]
    split_of = rng.integers(0, 3, size=n_total)
    split_of[0] = 2  # keep test non-empty
    splits: dict[int, list[Triple]] = {0: [], 1: [], 2: []}
    for code, triple in zip(split_of.tolist(), triples):
        splits[code].append(triple)
    return build_dataset(splits[0], splits[1], splits[2], entities, relations)


def verify_filtered(trials: int = 500, seed: int = 0) -> list[str]:
    """Set-equality of fast filtered candidates vs the scanning oracle."""
    rng = np.random.default_rng([seed, 1])
    mismatches = []
    for trial in range(trials):
        dataset = random_tiny_dataset(rng)
        for triple in dataset.test[:3]:
            for side in ("head", "tail"):
                query = Query(triple, side)
                fast = set(filtered_candidates(dataset, query).tolist())
                slow = set(oracle_filter(dataset, query))
                if fast != slow:
                    mismatches.append(
                        f"trial {trial}: candidates differ for {triple} side={side}: "
                        f"fast={sorted(fast)} oracle={sorted(slow)}"
                    )
    return mismatches


def verify_protocols(trials: int = 500, seed: int = 0) -> list[str]:
    """Fast-path profiles and ranks vs the insertion oracle on random KGs."""
    rng = np.random.default_rng([seed, 2])
    mismatches = []
    for trial in range(trials):
        dataset = random_tiny_dataset(rng)
        scorer = QuantizedHashScorer(seed=trial, levels=int(rng.integers(2, 6)))
        triple = dataset.test[int(rng.integers(0, len(dataset.test)))]
        side = ("head", "tail")[int(rng.integers(0, 2))]
        query = Query(triple, side)

        cands = filtered_candidates(dataset, query)
        scores = scorer.score_batch(query, cands)
        profile = tie_profile(scores, int(np.searchsorted(cands, query.answer)))
        ref_profile = oracle_profile(dataset, scorer, query)
        if profile != ref_profile:
            mismatches.append(f"trial {trial}: profile {profile} != oracle {ref_profile}")
            continue

        top_dist = oracle_rank(dataset, scorer, query, "top")
        bottom_dist = oracle_rank(dataset, scorer, query, "bottom")
        random_dist = oracle_rank(dataset, scorer, query, "random")
        if top_dist != {rank_top(profile): Fraction(1)}:
            mismatches.append(f"trial {trial}: top rank {rank_top(profile)} != {top_dist}")
        if bottom_dist != {rank_bottom(profile): Fraction(1)}:
            mismatches.append(
                f"trial {trial}: bottom rank {rank_bottom(profile)} != {bottom_dist}"
            )
        drawn = rank_random(profile, query_rng(seed, "test", trial, side))
        if drawn not in random_dist:
            mismatches.append(
                f"trial {trial}: random rank {drawn} outside support {sorted(random_dist)}"
            )
        if sum(random_dist.values()) != 1:
            mismatches.append(f"trial {trial}: random distribution not normalized")
        mean = sum(r * p for r, p in random_dist.items())
        if mean != Fraction(rank_top(profile) + rank_bottom(profile), 2):
            mismatches.append(f"trial {trial}: random mean {mean} is not the top/bottom midpoint")
    return mismatches


def run_verify(trials: int = 500, seed: int = 0) -> list[str]:
    """Both randomized equivalence suites; empty result means all good."""
    return verify_filtered(trials, seed) + verify_protocols(trials, seed)
