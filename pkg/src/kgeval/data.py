"""Triple datasets: TSV parsing, vocabularies, and the filtered candidate index.

Input files follow the usual benchmark layout: one triple per line,
``head<TAB>relation<TAB>tail``, one file per split. Surface strings are
opaque; no normalization is applied.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

DATASET_FORMAT_VERSION = 1

SIDES = ("head", "tail")
SPLITS = ("train", "valid", "test")


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class ParseError(ValueError):
    """Malformed triple line. Carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SchemaVersionError(ValueError):
    pass


@dataclass
class Vocab:
    """Dense string<->id mapping. Ids are assigned in first-seen order."""

    names: list[str] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)

    def add(self, name: str) -> int:
        """Return the id for ``name``, creating the next dense id if new."""
        got = self.index.get(name)
        if got is not None:
            return got
        new_id = len(self.names)
        self.names.append(name)
        self.index[name] = new_id
        return new_id

    def id_of(self, name: str) -> int:
        return self.index[name]

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.index


def parse_triples(
    lines: Iterable[str], entity_vocab: Vocab, relation_vocab: Vocab
) -> list[Triple]:
    """Parse tab-separated triple lines, extending the vocabularies in place.

    Duplicate triples are preserved in file order; dedup is the caller's
    policy. Empty lines are skipped. Raises ParseError when a non-empty
    line does not have exactly three tab-separated fields.
    """
    triples: list[Triple] = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(
                line_no, f"expected 3 tab-separated fields, got {len(fields)}"
            )
        h, r, t = fields
        triples.append(
            Triple(entity_vocab.add(h), relation_vocab.add(r), entity_vocab.add(t))
        )
    return triples


def read_triples_file(
    path: str | Path, entity_vocab: Vocab, relation_vocab: Vocab
) -> list[Triple]:
    with open(path, encoding="utf-8", newline="") as f:
        return parse_triples(f, entity_vocab, relation_vocab)


@dataclass(frozen=True)
class FilterIndex:
    """Set-valued lookup over all known-true triples, both directions.

    tails_of[(h, r)] and heads_of[(r, t)] stay mutually consistent because
    both are populated from the same triple stream. Inserts are idempotent,
    so duplicate input triples do not matter.
    """

    tails_of: dict[tuple[int, int], frozenset[int]]
    heads_of: dict[tuple[int, int], frozenset[int]]

    @classmethod
    def from_triples(cls, triples: Iterable[Triple]) -> "FilterIndex":
        tails: dict[tuple[int, int], set[int]] = {}
        heads: dict[tuple[int, int], set[int]] = {}
        for h, r, t in triples:
            tails.setdefault((h, r), set()).add(t)
            heads.setdefault((r, t), set()).add(h)
        return cls(
            tails_of={k: frozenset(v) for k, v in tails.items()},
            heads_of={k: frozenset(v) for k, v in heads.items()},
        )

    def known_tails(self, head: int, relation: int) -> frozenset[int]:
        return self.tails_of.get((head, relation), frozenset())

    def known_heads(self, relation: int, tail: int) -> frozenset[int]:
        return self.heads_of.get((relation, tail), frozenset())

    def __contains__(self, triple: Triple) -> bool:
        return triple.tail in self.tails_of.get((triple.head, triple.relation), ())


@dataclass(frozen=True)
class Dataset:
    entities: Vocab
    relations: Vocab
    train: list[Triple]
    valid: list[Triple]
    test: list[Triple]
    filter_index: FilterIndex

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def split(self, name: str) -> list[Triple]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def build_dataset(
    train: list[Triple],
    valid: list[Triple],
    test: list[Triple],
    entity_vocab: Vocab,
    relation_vocab: Vocab,
) -> Dataset:
    """Assemble a Dataset; the filter index covers train+valid+test."""
    n_e, n_r = len(entity_vocab), len(relation_vocab)
    for split_name, triples in (("train", train), ("valid", valid), ("test", test)):
        for tr in triples:
            if not (0 <= tr.head < n_e and 0 <= tr.tail < n_e and 0 <= tr.relation < n_r):
                raise ValueError(f"{split_name} triple {tr} out of vocabulary range")
    return Dataset(
        entities=entity_vocab,
        relations=relation_vocab,
        train=list(train),
        valid=list(valid),
        test=list(test),
        filter_index=FilterIndex.from_triples([*train, *valid, *test]),
    )


def load_dataset(
    train_path: str | Path, valid_path: str | Path, test_path: str | Path
) -> Dataset:
    """Read the three split files; vocabularies are built in split order."""
    entities, relations = Vocab(), Vocab()
    train = read_triples_file(train_path, entities, relations)
    valid = read_triples_file(valid_path, entities, relations)
    test = read_triples_file(test_path, entities, relations)
    return build_dataset(train, valid, test, entities, relations)


@dataclass(frozen=True)
class Query:
    """One ranking query: a known-true triple and the side being predicted."""

    triple: Triple
    side: str  # "head" or "tail"

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")

    @property
    def answer(self) -> int:
        return self.triple.head if self.side == "head" else self.triple.tail


def filtered_candidates(dataset: Dataset, query: Query) -> np.ndarray:
    """Candidate entity ids for a query under the filtered setting.

    All entities, minus every known-true answer for the query key, plus the
    evaluated answer itself. Returned sorted ascending so downstream code
    has a deterministic candidate order.
    """
    h, r, t = query.triple
    n_e = dataset.n_entities
    if not (0 <= h < n_e and 0 <= t < n_e and 0 <= r < dataset.n_relations):
        raise ValueError(f"query triple {query.triple} out of vocabulary range")
    if query.side == "tail":
        known = dataset.filter_index.known_tails(h, r)
    else:
        known = dataset.filter_index.known_heads(r, t)
    drop = known - {query.answer}
    if not drop:
        return np.arange(n_e, dtype=np.int64)
    keep = np.ones(n_e, dtype=bool)
    keep[list(drop)] = False
    return np.nonzero(keep)[0].astype(np.int64)


def all_candidates(dataset: Dataset) -> np.ndarray:
    """Raw-setting candidates: every entity."""
    return np.arange(dataset.n_entities, dtype=np.int64)


def dataset_to_jsonable(dataset: Dataset) -> dict:
    return {
        "format_version": DATASET_FORMAT_VERSION,
        "entities": list(dataset.entities.names),
        "relations": list(dataset.relations.names),
        "train": [list(t) for t in dataset.train],
        "valid": [list(t) for t in dataset.valid],
        "test": [list(t) for t in dataset.test],
    }


def dataset_to_json(dataset: Dataset) -> str:
    # Canonical encoding so save -> load -> save round-trips byte-identically.
    return json.dumps(dataset_to_jsonable(dataset), sort_keys=True, separators=(",", ":"))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    Path(path).write_text(dataset_to_json(dataset), encoding="utf-8")


def dataset_from_jsonable(obj: dict) -> Dataset:
    version = obj.get("format_version")
    if version != DATASET_FORMAT_VERSION:
        raise SchemaVersionError(
            f"dataset cache format_version {version!r}, expected {DATASET_FORMAT_VERSION}"
        )
    entities = Vocab()
    for name in obj["entities"]:
        entities.add(name)
    if len(entities) != len(obj["entities"]):
        raise ValueError("duplicate entity names in dataset cache")
    relations = Vocab()
    for name in obj["relations"]:
        relations.add(name)
    if len(relations) != len(obj["relations"]):
        raise ValueError("duplicate relation names in dataset cache")
    splits = {
        name: [Triple(*map(int, t)) for t in obj[name]]
        for name in SPLITS
    }
    return build_dataset(splits["train"], splits["valid"], splits["test"], entities, relations)


def load_dataset_cache(path: str | Path) -> Dataset:
    with open(path, encoding="utf-8") as f:
        return dataset_from_jsonable(json.load(f))
