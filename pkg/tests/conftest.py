"""Shared fixtures: small deterministic vocabularies and prompt hierarchies."""

import numpy as np
import pytest

from rahp import (
    EmbeddingMatrix,
    RegionDescriptionSet,
    SuperEntityMap,
    Vocabulary,
    index_hierarchy,
)
from rahp.prompts import entity_prompt, region_prompt


@pytest.fixture
def small_vocab():
    return Vocabulary(
        ("cat", "dog", "car", "bus", "tree", "rock"),
        ("on", "near", "under", "chasing"),
        ("base", "base", "base", "novel"),
    )


@pytest.fixture
def small_smap():
    return SuperEntityMap(
        ("animal", "vehicle", "scenery"),
        {"cat": 0, "dog": 0, "car": 1, "bus": 1, "tree": 2, "rock": 2},
    )


@pytest.fixture
def small_regions():
    regions = RegionDescriptionSet()
    regions.put(
        ("animal", "on", "vehicle"),
        ["animal paws on the vehicle roof", "animal body above the vehicle",
         "vehicle surface supporting the animal"],
    )
    regions.put(
        ("animal", "chasing", "animal"),
        ["one animal running behind another", "both animals in motion"],
    )
    return regions


def unit_rows(labels, dim, seed):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((len(labels), dim))
    data /= np.linalg.norm(data, axis=1, keepdims=True)
    return EmbeddingMatrix.create(labels, data, normalized=True)


def text_matrix_for(vocab, smap, regions, dim=32, seed=11):
    labels = []
    for subj in smap.super_names:
        for obj in smap.super_names:
            for pred in vocab.predicates:
                labels.append(entity_prompt(subj, pred, obj))
    for key in sorted(regions.keys()):
        for d in regions.get(key):
            p = region_prompt(d)
            if p not in labels:
                labels.append(p)
    return unit_rows(labels, dim, seed)


@pytest.fixture
def small_hierarchy(small_vocab, small_smap, small_regions):
    text = text_matrix_for(small_vocab, small_smap, small_regions)
    return index_hierarchy(small_vocab, small_smap, small_regions, text)
