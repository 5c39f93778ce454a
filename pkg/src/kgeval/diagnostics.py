"""Score-distribution diagnostics: tie frequencies and dead-ReLU ratios.

Histograms are emitted as CSV/JSON plot data, not rendered images.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import SIDES, Dataset, Triple
from .protocols import collect_profiles
from .scorers import Scorer, SupportsZeroRatioProbe

ZERO_RATIO_BUCKET_WIDTH = 0.05
_N_BUCKETS = 20


class ProbeCapabilityError(TypeError):
    """Scorer does not expose the post-ReLU zero-ratio probe."""


@dataclass(frozen=True)
class TieHistogram:
    """Distribution over queries of the tied-negative count."""

    counts: dict[int, int]  # tied-count -> number of queries
    n_queries: int
    mean_tied: float
    max_tied: int
    fraction_with_ties: float

    @classmethod
    def from_tied_counts(cls, tied_counts: Sequence[int]) -> "TieHistogram":
        arr = np.asarray(tied_counts, dtype=np.int64)
        if arr.size == 0:
            raise ValueError("no queries to histogram")
        counts: dict[int, int] = {}
        for value in arr.tolist():
            counts[value] = counts.get(value, 0) + 1
        return cls(
            counts=counts,
            n_queries=int(arr.size),
            mean_tied=float(arr.mean()),
            max_tied=int(arr.max()),
            fraction_with_ties=float(np.mean(arr > 0)),
        )

    def to_csv(self) -> str:
        lines = ["tied_count,queries"]
        lines += [f"{k},{self.counts[k]}" for k in sorted(self.counts)]
        return "\n".join(lines) + "\n"

    def to_jsonable(self) -> dict:
        return {
            "counts": {str(k): self.counts[k] for k in sorted(self.counts)},
            "n_queries": self.n_queries,
            "mean_tied": self.mean_tied,
            "max_tied": self.max_tied,
            "fraction_with_ties": self.fraction_with_ties,
        }


def tie_stats(
    dataset: Dataset,
    scorer: Scorer,
    split: str = "test",
    sides: Sequence[str] = SIDES,
    filtered: bool = True,
    tol: float = 0.0,
    threads: int | None = None,
) -> TieHistogram:
    """Tied-negative counts for every query of a split.

    Goes through the same profile computation as evaluate(), so the two can
    never disagree about a query's tied count.
    """
    records = collect_profiles(
        dataset, scorer, split=split, sides=sides, filtered=filtered, tol=tol, threads=threads
    )
    return TieHistogram.from_tied_counts([r.profile.tied for r in records])


@dataclass(frozen=True)
class ZeroRatioHistogram:
    """Post-ReLU zero-ratio distribution in buckets of width 0.05."""

    frequencies: list[float]  # 20 buckets, normalized
    mean_ratio: float
    n_samples: int

    @classmethod
    def from_ratios(cls, ratios: Sequence[float]) -> "ZeroRatioHistogram":
        arr = np.asarray(ratios, dtype=np.float64)
        if arr.size == 0:
            raise ValueError("no ratios to histogram")
        if (arr < 0).any() or (arr > 1).any():
            raise ValueError("zero ratios must lie in [0, 1]")
        buckets = np.minimum((arr / ZERO_RATIO_BUCKET_WIDTH).astype(np.int64), _N_BUCKETS - 1)
        freq = np.bincount(buckets, minlength=_N_BUCKETS) / arr.size
        return cls(
            frequencies=freq.tolist(),
            mean_ratio=float(arr.mean()),
            n_samples=int(arr.size),
        )

    def to_csv(self) -> str:
        lines = ["bucket_start,frequency"]
        lines += [
            f"{i * ZERO_RATIO_BUCKET_WIDTH:.2f},{freq:.6f}"
            for i, freq in enumerate(self.frequencies)
        ]
        return "\n".join(lines) + "\n"

    def to_jsonable(self) -> dict:
        return {
            "bucket_width": ZERO_RATIO_BUCKET_WIDTH,
            "frequencies": self.frequencies,
            "mean_ratio": self.mean_ratio,
            "n_samples": self.n_samples,
        }


def relu_zero_stats(scorer: Scorer, triples: Sequence[Triple]) -> ZeroRatioHistogram:
    """Zero-ratio histogram over the given triples, scored once each."""
    if not isinstance(scorer, SupportsZeroRatioProbe):
        raise ProbeCapabilityError(
            f"scorer kind {getattr(scorer, 'kind', '?')!r} has no zero-ratio probe"
        )
    if not triples:
        raise ValueError("no triples to probe")
    arr = np.asarray(triples, dtype=np.int64)
    _, ratios = scorer.score_triples_probed(arr[:, 0], arr[:, 1], arr[:, 2])
    return ZeroRatioHistogram.from_ratios(ratios)
