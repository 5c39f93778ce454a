"""Desk-scale SGD training for the embedding scorers.

Plain SGD with margin ranking loss and filtered negative sampling; no
adaptive optimizer, so a (seed, config, dataset) triple reproduces the run
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset, Triple
from .scorers import Scorer, TransEScorer, make_scorer

TRAINABLE_KINDS = ("transe", "distmult", "tied_relu")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr: float = 0.05
    margin: float = 1.0
    negatives: int = 4  # per positive, split across corrupt_sides
    batch_size: int = 32
    seed: int = 0
    dim: int = 8
    norm: str = "l2"  # transe only
    renormalize: bool = True  # transe only: unit-L2 entity rows after each step
    filter_negatives: bool = True
    corrupt_sides: tuple[str, ...] = ("head", "tail")

    def __post_init__(self):
        if self.epochs < 0 or self.negatives < 1 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0, negatives and batch_size >= 1")
        if self.lr <= 0 or self.margin <= 0:
            raise ValueError("lr and margin must be positive")

    def to_jsonable(self) -> dict:
        return {
            "epochs": self.epochs,
            "lr": self.lr,
            "margin": self.margin,
            "negatives": self.negatives,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "dim": self.dim,
            "norm": self.norm,
            "renormalize": self.renormalize,
            "filter_negatives": self.filter_negatives,
            "corrupt_sides": list(self.corrupt_sides),
        }


def sample_negatives(
    rng: np.random.Generator,
    triple: Triple,
    dataset: Dataset,
    k: int,
    side: str,
    filtered: bool = True,
) -> list[Triple]:
    """k corruptions of one side, never reproducing a known-true triple.

    Draws are uniform over the valid corruption pool (with replacement).
    If fewer than k valid corruptions exist, all of them are returned once,
    in ascending entity order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    h, r, t = triple
    if filtered:
        if side == "tail":
            excluded = dataset.filter_index.known_tails(h, r)
        else:
            excluded = dataset.filter_index.known_heads(r, t)
    else:
        excluded = frozenset({t if side == "tail" else h})
    pool = np.setdiff1d(
        np.arange(dataset.n_entities, dtype=np.int64),
        np.fromiter(excluded, dtype=np.int64, count=len(excluded)),
        assume_unique=True,
    )
    if pool.size == 0:
        return []
    if pool.size < k:
        picks = pool
    else:
        picks = pool[rng.integers(0, pool.size, size=k)]
    if side == "tail":
        return [Triple(h, r, int(e)) for e in picks]
    return [Triple(int(e), r, t) for e in picks]


def margin_loss(pos_score: float, neg_score: float, margin: float) -> float:
    """Hinge on the score gap: max(0, margin - pos + neg), higher-is-better."""
    if margin <= 0:
        raise ValueError("margin must be positive")
    return max(0.0, margin - pos_score + neg_score)


def pair_loss_and_grads(
    scorer: Scorer, pos: Triple, neg: Triple, margin: float
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and full analytic gradients for one (positive, negative) pair.

    Exposed mainly so tests can check the gradients against finite
    differences; train() accumulates the same contributions in place.
    """
    grads = scorer.zero_grads()  # type: ignore[attr-defined]
    loss = margin_loss(scorer.score_triple(pos), scorer.score_triple(neg), margin)
    if loss > 0.0:
        scorer.add_score_grad(pos, -1.0, grads)  # type: ignore[attr-defined]
        scorer.add_score_grad(neg, +1.0, grads)  # type: ignore[attr-defined]
    return loss, grads


@dataclass
class TrainResult:
    scorer: Scorer
    loss_trace: list[float] = field(default_factory=list)  # mean pair loss per epoch

    def to_jsonable(self) -> dict:
        return {"loss_trace": self.loss_trace}


def train(dataset: Dataset, kind: str, config: TrainConfig | None = None) -> TrainResult:
    """SGD over shuffled batches of margin-loss pairs.

    Negative sides are drawn per pair from config.corrupt_sides. Aborts with
    TrainingDiverged if the loss or any parameter goes non-finite.
    """
    config = config or TrainConfig()
    kind = kind.replace("-", "_")
    if kind not in TRAINABLE_KINDS:
        raise ValueError(f"kind must be one of {TRAINABLE_KINDS}, got {kind!r}")
    scorer = make_scorer(
        kind,
        dataset.n_entities,
        dataset.n_relations,
        dim=config.dim,
        seed=config.seed,
        norm=config.norm,
    )
    if not dataset.train:
        raise ValueError("empty training split")
    rng = np.random.default_rng([config.seed, 0x7261696E])  # sampling stream
    n = len(dataset.train)
    trace: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        epoch_pairs = 0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            grads = scorer.zero_grads()  # type: ignore[attr-defined]
            pairs = 0
            for i in batch:
                pos = dataset.train[int(i)]
                side_picks = rng.integers(0, len(config.corrupt_sides), size=config.negatives)
                for side_idx in range(len(config.corrupt_sides)):
                    count = int(np.sum(side_picks == side_idx))
                    if count == 0:
                        continue
                    negs = sample_negatives(
                        rng,
                        pos,
                        dataset,
                        count,
                        config.corrupt_sides[side_idx],
                        filtered=config.filter_negatives,
                    )
                    if not negs:
                        continue
                    s_pos = scorer.score_triple(pos)
                    for neg in negs:
                        loss = margin_loss(s_pos, scorer.score_triple(neg), config.margin)
                        epoch_loss += loss
                        pairs += 1
                        if loss > 0.0:
                            scorer.add_score_grad(pos, -1.0, grads)  # type: ignore[attr-defined]
                            scorer.add_score_grad(neg, +1.0, grads)  # type: ignore[attr-defined]
            if pairs:
                step = config.lr / pairs
                for name, arr in scorer.param_arrays().items():  # type: ignore[attr-defined]
                    arr -= step * grads[name]
                if isinstance(scorer, TransEScorer) and config.renormalize:
                    scorer.renormalize_entities()
                _check_finite(scorer)
            epoch_pairs += pairs
        mean_loss = epoch_loss / epoch_pairs if epoch_pairs else 0.0
        if not np.isfinite(mean_loss):
            raise TrainingDiverged(f"non-finite epoch loss {mean_loss}")
        trace.append(mean_loss)
    return TrainResult(scorer=scorer, loss_trace=trace)


def _check_finite(scorer: Scorer) -> None:
    for name, arr in scorer.param_arrays().items():  # type: ignore[attr-defined]
        if not np.isfinite(arr).all():
            raise TrainingDiverged(f"non-finite values in parameter {name!r}")
