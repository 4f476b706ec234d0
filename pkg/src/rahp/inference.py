"""Scene-graph assembly: probabilities, filtering, ranking, top-M selection."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


def to_probabilities(scores, temperature: float = 1.0) -> np.ndarray:
    """Temperature softmax; order-preserving for any temperature > 0."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    x = np.asarray(scores, dtype=np.float64) / temperature
    x = x - x.max()
    e = np.exp(x)
    return e / e.sum()


@dataclass(frozen=True)
class ScoredTriplet:
    subj_index: int
    obj_index: int
    predicate: int
    subj_prob: float
    obj_prob: float
    pred_prob: float

    @property
    def combined(self) -> float:
        return self.subj_prob * self.obj_prob * self.pred_prob


@dataclass(frozen=True)
class SceneGraphOut:
    image_id: str
    entities: tuple  # (label, box, prob) per entity
    triplets: tuple[ScoredTriplet, ...]

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "entities": [
                {"label": lab, "box": list(box), "prob": prob}
                for lab, box, prob in self.entities
            ],
            "triplets": [
                {
                    "subj": t.subj_index,
                    "pred": t.predicate,
                    "obj": t.obj_index,
                    "subj_prob": t.subj_prob,
                    "obj_prob": t.obj_prob,
                    "pred_prob": t.pred_prob,
                    "score": t.combined,
                }
                for t in self.triplets
            ],
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, doc) -> "SceneGraphOut":
        return cls(
            doc["image_id"],
            tuple((e["label"], tuple(e["box"]), e["prob"])
                  for e in doc["entities"]),
            tuple(
                ScoredTriplet(t["subj"], t["obj"], t["pred"],
                              t["subj_prob"], t["obj_prob"], t["pred_prob"])
                for t in doc["triplets"]
            ),
        )

    @classmethod
    def load(cls, path) -> "SceneGraphOut":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def postprocess(candidates) -> list[ScoredTriplet]:
    """Drop self-connected triplets; dedupe (subj, pred, obj), keeping the best.

    Input order is preserved apart from removals.
    """
    best: dict[tuple[int, int, int], ScoredTriplet] = {}
    order: list[tuple[int, int, int]] = []
    for t in candidates:
        if t.subj_index == t.obj_index:
            continue
        key = (t.subj_index, t.predicate, t.obj_index)
        if key not in best:
            best[key] = t
            order.append(key)
        elif t.combined > best[key].combined:
            best[key] = t
    return [best[k] for k in order]


def rank_and_select(filtered, m: int) -> tuple[ScoredTriplet, ...]:
    """Sort by combined descending, deterministic tie-break, truncate to m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    ordered = sorted(
        filtered,
        key=lambda t: (-t.combined, t.subj_index, t.obj_index, t.predicate),
    )
    return tuple(ordered[:m])


def build_scene_graph(image_id, entities, proposals, score_rows,
                      temperature: float = 1.0, top_m: int = 100,
                      graph_constraint: bool = False) -> SceneGraphOut:
    """Assemble the final graph from per-proposal predicate score rows.

    ``proposals`` is a list of (subj_index, obj_index, subj_prob, obj_prob);
    every predicate of every proposal becomes a candidate triplet.  With
    ``graph_constraint`` only the best predicate per ordered pair survives.
    """
    candidates = []
    for (si, oi, sp, op), row in zip(proposals, score_rows):
        probs = to_probabilities(row, temperature)
        for p, pp in enumerate(probs):
            candidates.append(ScoredTriplet(si, oi, p, sp, op, float(pp)))
    filtered = postprocess(candidates)
    if graph_constraint:
        per_pair: dict[tuple[int, int], ScoredTriplet] = {}
        for t in filtered:
            key = (t.subj_index, t.obj_index)
            if key not in per_pair or t.combined > per_pair[key].combined:
                per_pair[key] = t
        filtered = [t for t in filtered if per_pair[(t.subj_index, t.obj_index)] is t]
    return SceneGraphOut(
        str(image_id), tuple(entities), rank_and_select(filtered, top_m)
    )
