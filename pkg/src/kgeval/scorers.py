"""Pluggable triple scorers. Convention: strictly higher score = more plausible.

All arithmetic is float64. Reductions are written as elementwise products
followed by ``np.sum`` over the last axis: per-row results then depend only
on the row contents, so scoring a triple alone or inside a batch gives the
same bits. The brute-force oracle relies on that.
"""

from __future__ import annotations

import abc
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Query, SchemaVersionError, Triple

CHECKPOINT_FORMAT_VERSION = 1

SCORER_KINDS = ("constant", "transe", "distmult", "tied_relu")

# Pathological demonstrator defaults: a two-layer ReLU scorer whose hidden
# layer is nearly always fully zeroed, collapsing most triples onto one score.
TIED_RELU_HIDDEN = 16
TIED_RELU_WEIGHT_RANGE = 0.1
TIED_RELU_BIAS = -0.5
TIED_RELU_INPUT_SCALE = 3.5


class Scorer(abc.ABC):
    """Scoring function over id triples; pure and shareable across threads."""

    kind: str

    @abc.abstractmethod
    def score_triples(
        self, heads: np.ndarray, relations: np.ndarray, tails: np.ndarray
    ) -> np.ndarray:
        """Vectorized scores for aligned id arrays, float64, higher is better."""

    def score_batch(self, query: Query, candidates: Sequence[int]) -> np.ndarray:
        """Score the query triple with its open side replaced by each candidate."""
        cand = np.asarray(candidates, dtype=np.int64)
        h, r, t = query.triple
        rel = np.full(cand.shape, r, dtype=np.int64)
        if query.side == "tail":
            return self.score_triples(np.full(cand.shape, h, dtype=np.int64), rel, cand)
        return self.score_triples(cand, rel, np.full(cand.shape, t, dtype=np.int64))

    def score_triple(self, triple: Triple) -> float:
        h, r, t = (np.asarray([v], dtype=np.int64) for v in triple)
        return float(self.score_triples(h, r, t)[0])


class SupportsZeroRatioProbe(abc.ABC):
    """Capability: report the fraction of post-ReLU units equal to zero.

    Readout is per call, returned alongside the scores, so concurrent
    scoring stays race-free.
    """

    @abc.abstractmethod
    def score_triples_probed(
        self, heads: np.ndarray, relations: np.ndarray, tails: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Return (scores, zero_ratios); ratios lie in [0, 1]."""

    def score_batch_probed(
        self, query: Query, candidates: Sequence[int]
    ) -> tuple[np.ndarray, np.ndarray]:
        cand = np.asarray(candidates, dtype=np.int64)
        h, r, t = query.triple
        rel = np.full(cand.shape, r, dtype=np.int64)
        if query.side == "tail":
            return self.score_triples_probed(
                np.full(cand.shape, h, dtype=np.int64), rel, cand
            )
        return self.score_triples_probed(cand, rel, np.full(cand.shape, t, dtype=np.int64))


@dataclass
class EmbeddingTable:
    """Entity and relation embeddings, one row per id."""

    ent: np.ndarray  # (n_entities, dim)
    rel: np.ndarray  # (n_relations, dim)

    @property
    def dim(self) -> int:
        return self.ent.shape[1]

    def check_finite(self) -> None:
        if not (np.isfinite(self.ent).all() and np.isfinite(self.rel).all()):
            raise FloatingPointError("non-finite entries in embedding table")


def init_embeddings(
    n_entities: int, n_relations: int, dim: int, seed: int, scale: float | None = None
) -> EmbeddingTable:
    """Seeded uniform init in [-s, s]; default s = 6/sqrt(dim)."""
    bound = (6.0 / np.sqrt(dim)) if scale is None else scale
    rng = np.random.default_rng(seed)
    return EmbeddingTable(
        ent=rng.uniform(-bound, bound, size=(n_entities, dim)),
        rel=rng.uniform(-bound, bound, size=(n_relations, dim)),
    )


class ConstantScorer(Scorer):
    """Outputs one constant for every triple: every candidate ties."""

    kind = "constant"

    def __init__(self, value: float = 0.0):
        self.value = float(value)

    def score_triples(self, heads, relations, tails):
        return np.full(np.asarray(heads).shape, self.value, dtype=np.float64)


class TransEScorer(Scorer):
    """Translation scorer: -(L1 or L2 norm) of e_h + e_r - e_t."""

    kind = "transe"

    def __init__(self, emb: EmbeddingTable, norm: str = "l2"):
        if norm not in ("l1", "l2"):
            raise ValueError(f"norm must be 'l1' or 'l2', got {norm!r}")
        self.emb = emb
        self.norm = norm

    def score_triples(self, heads, relations, tails):
        delta = self.emb.ent[heads] + self.emb.rel[relations] - self.emb.ent[tails]
        if self.norm == "l2":
            return -np.sqrt(np.sum(delta * delta, axis=-1))
        return -np.sum(np.abs(delta), axis=-1)

    # -- training support -------------------------------------------------

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {"ent": self.emb.ent, "rel": self.emb.rel}

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.param_arrays().items()}

    def add_score_grad(self, triple: Triple, coeff: float, grads: dict[str, np.ndarray]) -> None:
        h, r, t = triple
        delta = self.emb.ent[h] + self.emb.rel[r] - self.emb.ent[t]
        if self.norm == "l2":
            nrm = float(np.sqrt(np.sum(delta * delta)))
            if nrm == 0.0:
                return
            g = delta / nrm
        else:
            g = np.sign(delta)
        grads["ent"][h] -= coeff * g
        grads["rel"][r] -= coeff * g
        grads["ent"][t] += coeff * g

    def renormalize_entities(self) -> None:
        norms = np.sqrt(np.sum(self.emb.ent * self.emb.ent, axis=-1, keepdims=True))
        np.divide(self.emb.ent, norms, out=self.emb.ent, where=norms > 0)


class DistMultScorer(Scorer):
    """Trilinear scorer: sum_i e_h[i] * e_r[i] * e_t[i]."""

    kind = "distmult"

    def __init__(self, emb: EmbeddingTable):
        self.emb = emb

    def score_triples(self, heads, relations, tails):
        return np.sum(
            self.emb.ent[heads] * self.emb.rel[relations] * self.emb.ent[tails], axis=-1
        )

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {"ent": self.emb.ent, "rel": self.emb.rel}

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.param_arrays().items()}

    def add_score_grad(self, triple: Triple, coeff: float, grads: dict[str, np.ndarray]) -> None:
        h, r, t = triple
        eh, er, et = self.emb.ent[h], self.emb.rel[r], self.emb.ent[t]
        grads["ent"][h] += coeff * er * et
        grads["rel"][r] += coeff * eh * et
        grads["ent"][t] += coeff * eh * er


class TiedReluScorer(Scorer, SupportsZeroRatioProbe):
    """Two-layer scorer: score = w . relu(W [e_h;e_r;e_t] + b) + b_out.

    With the pathological init most hidden units are zero for most inputs,
    so many triples collapse onto the exact same score.
    """

    kind = "tied_relu"

    def __init__(
        self,
        emb: EmbeddingTable,
        w_hidden: np.ndarray,  # (hidden, 3*dim)
        b_hidden: np.ndarray,  # (hidden,)
        w_out: np.ndarray,  # (hidden,)
        b_out: np.ndarray,  # (1,)
    ):
        if w_hidden.shape[1] != 3 * emb.dim:
            raise ValueError("hidden weight width must be 3*dim")
        self.emb = emb
        self.w_hidden = w_hidden
        self.b_hidden = b_hidden
        self.w_out = w_out
        self.b_out = b_out

    def _hidden(self, heads, relations, tails) -> np.ndarray:
        x = np.concatenate(
            [self.emb.ent[heads], self.emb.rel[relations], self.emb.ent[tails]], axis=-1
        )
        pre = np.sum(x[:, None, :] * self.w_hidden[None, :, :], axis=-1) + self.b_hidden
        return np.maximum(pre, 0.0)

    def score_triples(self, heads, relations, tails):
        z = self._hidden(heads, relations, tails)
        return np.sum(z * self.w_out[None, :], axis=-1) + self.b_out[0]

    def score_triples_probed(self, heads, relations, tails):
        z = self._hidden(heads, relations, tails)
        scores = np.sum(z * self.w_out[None, :], axis=-1) + self.b_out[0]
        return scores, np.mean(z == 0.0, axis=-1)

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {
            "ent": self.emb.ent,
            "rel": self.emb.rel,
            "w_hidden": self.w_hidden,
            "b_hidden": self.b_hidden,
            "w_out": self.w_out,
            "b_out": self.b_out,
        }

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.param_arrays().items()}

    def add_score_grad(self, triple: Triple, coeff: float, grads: dict[str, np.ndarray]) -> None:
        h, r, t = triple
        d = self.emb.dim
        x = np.concatenate([self.emb.ent[h], self.emb.rel[r], self.emb.ent[t]])
        pre = np.sum(self.w_hidden * x[None, :], axis=-1) + self.b_hidden
        mask = pre > 0.0
        z = np.where(mask, pre, 0.0)
        gate = self.w_out * mask
        grads["w_hidden"] += coeff * gate[:, None] * x[None, :]
        grads["b_hidden"] += coeff * gate
        grads["w_out"] += coeff * z
        grads["b_out"] += coeff
        gx = np.sum(self.w_hidden * gate[:, None], axis=0)
        grads["ent"][h] += coeff * gx[:d]
        grads["rel"][r] += coeff * gx[d : 2 * d]
        grads["ent"][t] += coeff * gx[2 * d :]


def pathological_tied_relu(
    n_entities: int,
    n_relations: int,
    dim: int = 8,
    seed: int = 0,
    hidden: int = TIED_RELU_HIDDEN,
    input_scale: float = TIED_RELU_INPUT_SCALE,
) -> TiedReluScorer:
    """TiedReluScorer initialized so the hidden layer is nearly always dead.

    Hidden and output weights are uniform in [-0.1, 0.1] and the hidden bias
    sits at -0.5. Input embeddings are drawn with expected norm
    ``input_scale`` (entries uniform in +-input_scale/sqrt(dim)); at the
    default 3.5 roughly 90% of triples zero out the entire hidden layer,
    which is what makes the tie structure appear.
    """
    rng = np.random.default_rng(seed)
    bound = input_scale / np.sqrt(dim)
    emb = EmbeddingTable(
        ent=rng.uniform(-bound, bound, size=(n_entities, dim)),
        rel=rng.uniform(-bound, bound, size=(n_relations, dim)),
    )
    w = TIED_RELU_WEIGHT_RANGE
    return TiedReluScorer(
        emb=emb,
        w_hidden=rng.uniform(-w, w, size=(hidden, 3 * dim)),
        b_hidden=np.full(hidden, TIED_RELU_BIAS),
        w_out=rng.uniform(-w, w, size=hidden),
        b_out=np.zeros(1),
    )


def make_scorer(
    kind: str,
    n_entities: int,
    n_relations: int,
    dim: int = 8,
    seed: int = 0,
    norm: str = "l2",
    constant_value: float = 0.0,
    hidden: int = TIED_RELU_HIDDEN,
    input_scale: float = TIED_RELU_INPUT_SCALE,
) -> Scorer:
    kind = kind.replace("-", "_")
    if kind == "constant":
        return ConstantScorer(constant_value)
    if kind == "transe":
        return TransEScorer(init_embeddings(n_entities, n_relations, dim, seed), norm)
    if kind == "distmult":
        return DistMultScorer(init_embeddings(n_entities, n_relations, dim, seed))
    if kind == "tied_relu":
        return pathological_tied_relu(
            n_entities, n_relations, dim=dim, seed=seed, hidden=hidden, input_scale=input_scale
        )
    raise ValueError(f"unknown scorer kind {kind!r}")


# -- checkpoint io ---------------------------------------------------------


def checkpoint_to_jsonable(scorer: Scorer, seed: int | None = None) -> dict:
    obj: dict = {"format_version": CHECKPOINT_FORMAT_VERSION, "kind": scorer.kind}
    if seed is not None:
        obj["seed"] = seed
    if isinstance(scorer, ConstantScorer):
        obj["params"] = {"value": scorer.value}
        return obj
    if isinstance(scorer, TransEScorer):
        obj["norm"] = scorer.norm
    obj["dim"] = scorer.emb.dim  # type: ignore[attr-defined]
    params = {name: arr.tolist() for name, arr in scorer.param_arrays().items()}  # type: ignore[attr-defined]
    obj["params"] = params
    return obj


def save_checkpoint(scorer: Scorer, path: str | Path, seed: int | None = None) -> None:
    text = json.dumps(checkpoint_to_jsonable(scorer, seed), sort_keys=True)
    Path(path).write_text(text, encoding="utf-8")


def scorer_from_jsonable(obj: dict) -> Scorer:
    version = obj.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise SchemaVersionError(
            f"checkpoint format_version {version!r}, expected {CHECKPOINT_FORMAT_VERSION}"
        )
    kind = obj["kind"]
    params = obj["params"]
    if kind == "constant":
        return ConstantScorer(params["value"])
    arrays = {name: np.array(value, dtype=np.float64) for name, value in params.items()}
    emb = EmbeddingTable(ent=arrays["ent"], rel=arrays["rel"])
    if kind == "transe":
        return TransEScorer(emb, norm=obj.get("norm", "l2"))
    if kind == "distmult":
        return DistMultScorer(emb)
    if kind == "tied_relu":
        return TiedReluScorer(
            emb=emb,
            w_hidden=arrays["w_hidden"],
            b_hidden=arrays["b_hidden"],
            w_out=arrays["w_out"],
            b_out=arrays["b_out"],
        )
    raise ValueError(f"unknown scorer kind {kind!r} in checkpoint")


def load_checkpoint(path: str | Path) -> Scorer:
    with open(path, encoding="utf-8") as f:
        return scorer_from_jsonable(json.load(f))
