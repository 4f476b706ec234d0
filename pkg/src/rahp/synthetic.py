"""Deterministic synthetic corpus generation for self-tests and benchmarks.

Every embedding is a pure function of (string, dim, seed), so regenerating a
corpus with the same seed reproduces it byte for byte.  Relation features are
planted near the text prompt of the ground-truth predicate so scoring and
evaluation produce meaningful (non-chance) recall on the synthetic data.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .clustering import SuperEntityMap, build_super_map
from .embedding_store import EmbeddingMatrix, save_embeddings
from .prompts import (
    RegionDescriptionSet,
    Vocabulary,
    build_entity_prompts,
    entity_prompt,
    region_prompt,
)


def string_embedding(text: str, dim: int, seed: int) -> np.ndarray:
    """Unit vector derived deterministically from a string and a seed."""
    digest = hashlib.blake2b(
        f"{seed}\x00{text}".encode("utf-8"), digest_size=8
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def matrix_for_strings(strings, dim: int, seed: int) -> EmbeddingMatrix:
    data = np.stack([string_embedding(s, dim, seed) for s in strings])
    return EmbeddingMatrix.create(strings, data, normalized=True)


def synthetic_vocab(n_entities: int, n_predicates: int,
                    novel_fraction: float = 0.3) -> Vocabulary:
    n_novel = int(round(n_predicates * novel_fraction))
    splits = ["base"] * (n_predicates - n_novel) + ["novel"] * n_novel
    return Vocabulary(
        tuple(f"entity{i:03d}" for i in range(n_entities)),
        tuple(f"predicate{i:03d}" for i in range(n_predicates)),
        tuple(splits),
    )


def synthetic_regions(smap: SuperEntityMap, vocab: Vocabulary, seed: int,
                      n_keys: int = 40, n_descs: int = 6) -> RegionDescriptionSet:
    """Descriptions for a deterministic sample of (super, pred, super) keys."""
    rng = np.random.default_rng(seed)
    supers = smap.super_names
    regions = RegionDescriptionSet()
    for _ in range(n_keys):
        key = (
            supers[int(rng.integers(len(supers)))],
            vocab.predicates[int(rng.integers(len(vocab.predicates)))],
            supers[int(rng.integers(len(supers)))],
        )
        descs = [
            f"{key[0]} part {i} interacting via {key[1]} with {key[2]}"
            for i in range(n_descs)
        ]
        regions.put(key, descs)
    return regions


def build_text_matrix(vocab: Vocabulary, smap: SuperEntityMap,
                      regions: RegionDescriptionSet, dim: int, seed: int,
                      region_tie: float = 0.3) -> EmbeddingMatrix:
    """Embeddings for every prompt string.

    Region prompt embeddings are pulled toward the entity prompt of their
    (pair, predicate) by ``region_tie`` noise so the region pathway carries
    the same planted signal as the entity pathway.
    """
    labels: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()

    def add(label: str, vec: np.ndarray) -> None:
        if label not in seen:
            seen.add(label)
            labels.append(label)
            rows.append(vec / np.linalg.norm(vec))

    for (subj, obj), pred, prompt in build_entity_prompts(vocab, smap):
        add(prompt, string_embedding(prompt, dim, seed))
    for subj, pred, obj in sorted(regions.keys()):
        anchor = string_embedding(entity_prompt(subj, pred, obj), dim, seed)
        for desc in regions.get((subj, pred, obj)):
            rp = region_prompt(desc)
            noise = string_embedding(rp, dim, seed + 1)
            add(rp, anchor + region_tie * noise)
    return EmbeddingMatrix.create(labels, np.stack(rows), normalized=True)


def generate_corpus(root, n_images: int = 100, n_proposals: int = 100,
                    n_entities: int = 150, n_predicates: int = 50,
                    num_super: int = 30, dim: int = 512, seed: int = 7,
                    entities_per_image: int = 8, gt_per_image: int = 15,
                    noise: float = 0.05) -> None:
    """Write a full corpus layout under ``root``.

    Layout: vocab.json, names.json, regions.json, entity_emb.bin,
    text_emb.bin, gt.json, and images/<id>/{proposals.json, r.bin, u.bin}.
    """
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    vocab = synthetic_vocab(n_entities, n_predicates)
    vocab.save(root / "vocab.json")

    entity_emb = matrix_for_strings(list(vocab.entities), dim, seed)
    save_embeddings(entity_emb, root / "entity_emb.bin", "binary")
    names = [f"super{i:03d}" for i in range(num_super)]
    with open(root / "names.json", "w", encoding="utf-8") as fh:
        json.dump(names, fh)

    smap = build_super_map(entity_emb, num_super, names, seed=seed)
    regions = synthetic_regions(smap, vocab, seed + 2)
    regions.save(root / "regions.json")
    text_emb = build_text_matrix(vocab, smap, regions, dim, seed)
    save_embeddings(text_emb, root / "text_emb.bin", "binary")

    rng = np.random.default_rng(seed + 3)
    scenes = []
    for img in range(n_images):
        image_id = f"img{img:04d}"
        ent_idx = rng.choice(len(vocab.entities), entities_per_image,
                             replace=False)
        ent_labels = [vocab.entities[int(i)] for i in ent_idx]
        boxes = []
        for _ in ent_labels:
            x1, y1 = rng.uniform(0, 400, 2)
            w, h = rng.uniform(20, 200, 2)
            boxes.append([float(x1), float(y1), float(x1 + w), float(y1 + h)])

        gt_rel = []
        seen_pairs = set()
        while len(gt_rel) < gt_per_image:
            s, o = rng.integers(entities_per_image, size=2)
            if s == o or (int(s), int(o)) in seen_pairs:
                continue
            seen_pairs.add((int(s), int(o)))
            p = int(rng.integers(n_predicates))
            gt_rel.append((int(s), int(o), vocab.predicates[p]))
        scenes.append(
            {
                "image_id": image_id,
                "entities": [
                    {"label": lab, "box": box}
                    for lab, box in zip(ent_labels, boxes)
                ],
                "relations": [
                    {"subj": s, "obj": o, "pred": p} for s, o, p in gt_rel
                ],
            }
        )

        # Proposals: ground-truth pairs first (signal planted), then noise.
        props = []
        r_rows = []
        u_rows = []
        for i in range(n_proposals):
            if i < len(gt_rel):
                s, o, pred = gt_rel[i]
            else:
                s, o = 0, 1
                while s == o:
                    s, o = (int(x) for x in rng.integers(entities_per_image,
                                                         size=2))
                pred = vocab.predicates[int(rng.integers(n_predicates))]
            pair = (smap.super_of(ent_labels[s]), smap.super_of(ent_labels[o]))
            anchor = text_emb.row(entity_prompt(pair[0], pred, pair[1]))
            r = anchor + noise * rng.standard_normal(dim)
            u = anchor + noise * rng.standard_normal(dim)
            r_rows.append(r / np.linalg.norm(r))
            u_rows.append(u / np.linalg.norm(u))
            props.append(
                {
                    "subj_box": boxes[s],
                    "obj_box": boxes[o],
                    "subj_label": ent_labels[s],
                    "obj_label": ent_labels[o],
                    "subj_index": s,
                    "obj_index": o,
                }
            )

        img_dir = root / "images" / image_id
        img_dir.mkdir(parents=True, exist_ok=True)
        with open(img_dir / "proposals.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "image_id": image_id,
                    "entities": [
                        {"label": lab, "box": box, "prob": 1.0}
                        for lab, box in zip(ent_labels, boxes)
                    ],
                    "proposals": props,
                },
                fh,
            )
        save_embeddings(
            matrix_like(r_rows, "r"), img_dir / "r.bin", "binary"
        )
        save_embeddings(
            matrix_like(u_rows, "u"), img_dir / "u.bin", "binary"
        )

    with open(root / "gt.json", "w", encoding="utf-8") as fh:
        json.dump({"scenes": scenes}, fh)


def matrix_like(rows, prefix: str) -> EmbeddingMatrix:
    labels = [f"{prefix}{i:05d}" for i in range(len(rows))]
    return EmbeddingMatrix.create(labels, np.stack(rows), normalized=True)
