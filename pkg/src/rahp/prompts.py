"""Two-level prompt construction and embedding lookup.

Entity-level prompts instantiate "A photo of a/an [Subject] [Predicate] a/an
[Object]" for every (super-subject, super-object) pair and predicate; region
prompts wrap mined descriptions in "A region that reflects [description]".
The hierarchy indexes both levels against a text embedding matrix whose row
labels are the exact prompt strings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .clustering import SuperEntityMap
from .embedding_store import EmbeddingMatrix
from .errors import MalformedHeader, MissingEmbedding

_VOWELS = "aeiouAEIOU"


def article(noun: str) -> str:
    """'an' before a vowel-initial surface form, 'a' otherwise."""
    return "an" if noun[:1] in _VOWELS else "a"


def entity_prompt(subject: str, predicate: str, obj: str) -> str:
    return (
        f"A photo of {article(subject)} {subject} {predicate} "
        f"{article(obj)} {obj}"
    )


def region_prompt(description: str) -> str:
    return f"A region that reflects {description}"


@dataclass(frozen=True)
class Vocabulary:
    entities: tuple[str, ...]
    predicates: tuple[str, ...]
    splits: tuple[str, ...]  # "base" | "novel", parallel to predicates

    def __post_init__(self):
        if len(set(self.entities)) != len(self.entities):
            raise MalformedHeader("duplicate entity names")
        if len(set(self.predicates)) != len(self.predicates):
            raise MalformedHeader("duplicate predicate names")
        if len(self.predicates) != len(self.splits):
            raise MalformedHeader("predicate/split length mismatch")
        if any(s not in ("base", "novel") for s in self.splits):
            raise MalformedHeader("split must be 'base' or 'novel'")
        if "base" not in self.splits:
            raise MalformedHeader("vocabulary needs at least one base predicate")

    @property
    def num_predicates(self) -> int:
        return len(self.predicates)

    def predicate_index(self, name: str) -> int:
        return self.predicates.index(name)

    def split_predicates(self, split: str) -> tuple[str, ...]:
        if split == "total":
            return self.predicates
        return tuple(p for p, s in zip(self.predicates, self.splits) if s == split)

    @classmethod
    def from_dict(cls, doc) -> "Vocabulary":
        preds = [(p["name"], p.get("split", "base")) for p in doc["predicates"]]
        return cls(
            tuple(doc["entities"]),
            tuple(p for p, _ in preds),
            tuple(s for _, s in preds),
        )

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        doc = {
            "entities": list(self.entities),
            "predicates": [
                {"name": p, "split": s}
                for p, s in zip(self.predicates, self.splits)
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)


class RegionDescriptionSet:
    """(super-subject, predicate, super-object) -> ordered description list."""

    def __init__(self, mapping: dict[tuple[str, str, str], list[str]] | None = None):
        self._map: dict[tuple[str, str, str], list[str]] = {}
        for key, descs in (mapping or {}).items():
            self.put(key, descs)

    def put(self, key: tuple[str, str, str], descriptions) -> None:
        descs = [str(d) for d in descriptions]
        if any(not d for d in descs):
            raise MalformedHeader(f"empty description under {key}")
        self._map[tuple(key)] = descs

    def get(self, key: tuple[str, str, str]) -> list[str]:
        return list(self._map.get(tuple(key), []))

    def keys(self):
        return self._map.keys()

    def merge(self, other: "RegionDescriptionSet") -> None:
        for key in other.keys():
            self._map[key] = other.get(key)

    def __len__(self) -> int:
        return len(self._map)

    @classmethod
    def load(cls, path) -> "RegionDescriptionSet":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        out = cls()
        for key, descs in doc.items():
            parts = key.split("|")
            if len(parts) != 3:
                raise MalformedHeader(f"bad region key {key!r}")
            out.put((parts[0], parts[1], parts[2]), descs)
        return out

    def save(self, path) -> None:
        doc = {"|".join(k): v for k, v in sorted(self._map.items())}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)


def build_entity_prompts(vocab: Vocabulary, smap: SuperEntityMap):
    """All C_se^2 * C_p entity-level prompts as (pair, predicate, prompt)."""
    out = []
    for subj in smap.super_names:
        for obj in smap.super_names:
            for pred in vocab.predicates:
                out.append(((subj, obj), pred, entity_prompt(subj, pred, obj)))
    return out


def build_region_prompts(regions: RegionDescriptionSet):
    """Wrap every mined description; ordering within a key is preserved."""
    out = []
    for subj, pred, obj in sorted(regions.keys()):
        descs = regions.get((subj, pred, obj))
        out.append(((subj, obj), pred, [region_prompt(d) for d in descs]))
    return out


@dataclass(frozen=True)
class PairPrompts:
    """Prompts and embedding row indices for one super-entity pair."""

    entity_prompts: tuple[str, ...]            # C_p strings, predicate order
    entity_rows: np.ndarray                    # (C_p,) indices into text matrix
    region_prompts: dict[str, tuple[str, ...]]  # predicate -> prompt strings
    region_rows: dict[str, np.ndarray]          # predicate -> (N_r,) indices


@dataclass(frozen=True)
class PromptHierarchy:
    vocab: Vocabulary
    smap: SuperEntityMap
    text_emb: EmbeddingMatrix
    pairs: dict[tuple[str, str], PairPrompts] = field(repr=False)

    @property
    def dim(self) -> int:
        return self.text_emb.dim

    def pair_keys(self) -> list[tuple[str, str]]:
        keys = []
        for subj in self.smap.super_names:
            for obj in self.smap.super_names:
                keys.append((subj, obj))
        return keys

    def entity_block(self, pair: tuple[str, str]) -> np.ndarray:
        """(C_p, d) embedding block for a pair's entity prompts."""
        return self.text_emb.data[self.pairs[pair].entity_rows]

    def region_block(self, pair: tuple[str, str], predicate: str) -> np.ndarray:
        """(N_r, d) embedding block for one pair/predicate; may be empty."""
        rows = self.pairs[pair].region_rows.get(predicate)
        if rows is None:
            return self.text_emb.data[np.empty(0, dtype=np.intp)]
        return self.text_emb.data[rows]


def index_hierarchy(vocab: Vocabulary, smap: SuperEntityMap,
                    regions: RegionDescriptionSet,
                    text_emb: EmbeddingMatrix) -> PromptHierarchy:
    """Resolve every prompt string to its embedding row."""

    def rows_for(prompts) -> np.ndarray:
        idx = np.empty(len(prompts), dtype=np.intp)
        for i, p in enumerate(prompts):
            if p not in text_emb:
                raise MissingEmbedding(f"no embedding row for prompt {p!r}")
            idx[i] = text_emb.row_index(p)
        return idx

    pairs: dict[tuple[str, str], PairPrompts] = {}
    for subj in smap.super_names:
        for obj in smap.super_names:
            eprompts = tuple(
                entity_prompt(subj, pred, obj) for pred in vocab.predicates
            )
            rprompts: dict[str, tuple[str, ...]] = {}
            rrows: dict[str, np.ndarray] = {}
            for pred in vocab.predicates:
                descs = regions.get((subj, pred, obj))
                if descs:
                    ps = tuple(region_prompt(d) for d in descs)
                    rprompts[pred] = ps
                    rrows[pred] = rows_for(ps)
            pairs[(subj, obj)] = PairPrompts(
                eprompts, rows_for(eprompts), rprompts, rrows
            )
    return PromptHierarchy(vocab, smap, text_emb, pairs)
