"""Synthetic benchmark graphs with planted translation geometry.

Entities get ground-truth points on the unit sphere and each relation a
small offset vector; the tail of (h, r) is the entity nearest to
e_h + v_r. A translation scorer can therefore learn the structure, which
keeps protocol experiments honest: scores come from training, not from
hand-planted values.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import Dataset, Triple, Vocab, build_dataset


def make_synthetic_kg(
    n_entities: int = 50,
    n_relations: int = 8,
    dim: int = 8,
    seed: int = 7,
    valid_fraction: float = 0.1,
    test_fraction: float = 0.1,
) -> Dataset:
    """One triple per (head, relation) pair, split deterministically."""
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(n_entities, dim))
    points /= np.sqrt(np.sum(points * points, axis=1, keepdims=True))
    offsets = 0.5 * rng.normal(size=(n_relations, dim))

    triples: list[Triple] = []
    for h in range(n_entities):
        for r in range(n_relations):
            shifted = points[h] + offsets[r]
            dist = np.sum((points - shifted) ** 2, axis=1)
            dist[h] = np.inf  # self-loops excluded
            triples.append(Triple(h, r, int(np.argmin(dist))))

    order = rng.permutation(len(triples))
    n_valid = int(len(triples) * valid_fraction)
    n_test = int(len(triples) * test_fraction)
    valid = [triples[i] for i in order[:n_valid]]
    test = [triples[i] for i in order[n_valid : n_valid + n_test]]
    train = [triples[i] for i in order[n_valid + n_test :]]

    entities = Vocab()
    relations = Vocab()
    width = len(str(n_entities - 1))
    for i in range(n_entities):
        entities.add(f"e{i:0{width}d}")
    for i in range(n_relations):
        relations.add(f"r{i}")
    return build_dataset(train, valid, test, entities, relations)


def write_tsv_splits(dataset: Dataset, out_dir: str | Path) -> dict[str, Path]:
    """Write train/valid/test TSVs with surface names; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for split in ("train", "valid", "test"):
        path = out / f"{split}.txt"
        lines = [
            f"{dataset.entities.names[h]}\t{dataset.relations.names[r]}\t{dataset.entities.names[t]}"
            for h, r, t in dataset.split(split)
        ]
        path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        paths[split] = path
    return paths
