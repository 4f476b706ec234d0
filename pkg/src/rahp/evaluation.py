"""Recall@K / mean-Recall@K under the PredCLS and SGDet matching protocols.

Matching is greedy in prediction-rank order and each ground-truth triplet can
be matched at most once.  Recall@K is macro-averaged over images; mean recall
averages per-predicate corpus-wide recalls over predicates with at least one
ground-truth instance in the split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ProtocolViolation
from .inference import SceneGraphOut
from .prompts import Vocabulary

PREDCLS = "predcls"
SGDET = "sgdet"
_BOX_TOL = 1e-6


@dataclass(frozen=True)
class GroundTruthScene:
    image_id: str
    entities: tuple  # (label, (x1, y1, x2, y2)) per entity
    relations: tuple  # (subj_index, obj_index, predicate_name)

    def __post_init__(self):
        n = len(self.entities)
        for s, o, _ in self.relations:
            if not (0 <= s < n and 0 <= o < n):
                raise ProtocolViolation("relation references a missing entity")
            if s == o:
                raise ProtocolViolation("ground truth contains a self-relation")

    @classmethod
    def from_dict(cls, doc) -> "GroundTruthScene":
        return cls(
            str(doc["image_id"]),
            tuple((e["label"], tuple(e["box"])) for e in doc["entities"]),
            tuple((r["subj"], r["obj"], r["pred"]) for r in doc["relations"]),
        )

    @classmethod
    def load_corpus(cls, path) -> list["GroundTruthScene"]:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return [cls.from_dict(s) for s in doc["scenes"]]


def box_iou(a, b) -> float:
    iw = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    if inter == 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def _check_predcls(pred: SceneGraphOut, gt: GroundTruthScene) -> None:
    if len(pred.entities) != len(gt.entities):
        raise ProtocolViolation("predcls: entity count differs from GT")
    for (pl, pb, _), (gl, gb) in zip(pred.entities, gt.entities):
        if pl != gl:
            raise ProtocolViolation(f"predcls: label {pl!r} differs from GT {gl!r}")
        if any(abs(x - y) > _BOX_TOL for x, y in zip(pb, gb)):
            raise ProtocolViolation("predcls: boxes differ from GT")


def match_triplets(pred: SceneGraphOut, gt: GroundTruthScene,
                   vocab: Vocabulary, protocol: str = PREDCLS,
                   iou_thresh: float = 0.5) -> dict[int, int]:
    """Greedy rank-order matching; returns {gt_relation_index: pred_rank}."""
    if protocol not in (PREDCLS, SGDET):
        raise ProtocolViolation(f"unknown protocol {protocol!r}")
    if protocol == PREDCLS:
        _check_predcls(pred, gt)

    matched: dict[int, int] = {}
    taken: set[int] = set()
    for rank, t in enumerate(pred.triplets):
        pred_name = vocab.predicates[t.predicate]
        p_subj = pred.entities[t.subj_index]
        p_obj = pred.entities[t.obj_index]
        for g_idx, (gs, go, gp) in enumerate(gt.relations):
            if g_idx in taken or gp != pred_name:
                continue
            g_subj = gt.entities[gs]
            g_obj = gt.entities[go]
            if p_subj[0] != g_subj[0] or p_obj[0] != g_obj[0]:
                continue
            # Both protocols localize via IoU; under PredCLS the prediction
            # carries the ground-truth boxes, so correct matches have IoU 1.
            if (box_iou(p_subj[1], g_subj[1]) < iou_thresh
                    or box_iou(p_obj[1], g_obj[1]) < iou_thresh):
                continue
            matched[g_idx] = rank
            taken.add(g_idx)
            break
    return matched


@dataclass(frozen=True)
class EvalReport:
    protocol: str
    ks: tuple[int, ...]
    splits: dict = field(default_factory=dict)
    # splits[name] = {"recall": {k: v}, "mean_recall": {k: v or None},
    #                 "per_predicate": {pred: {k: recall}}, "gt_count": n}
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "ks": list(self.ks),
            "splits": self.splits,
            "metadata": self.metadata,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def recall_at_k(image_results, k: int) -> float:
    """Macro recall: mean over images of the matched-in-top-k fraction.

    ``image_results`` holds (matched {gt_idx: rank}, n_gt) pairs; images
    without GT relations are skipped.
    """
    fractions = []
    for matched, n_gt in image_results:
        if n_gt == 0:
            continue
        hits = sum(1 for rank in matched.values() if rank < k)
        fractions.append(hits / n_gt)
    return sum(fractions) / len(fractions) if fractions else 0.0


def per_predicate_recall(scene_pairs, vocab: Vocabulary, k: int) -> dict:
    """Corpus-wide recall per predicate name over its GT instances."""
    totals = {p: 0 for p in vocab.predicates}
    hits = {p: 0 for p in vocab.predicates}
    for (matched, gt) in scene_pairs:
        for g_idx, (_, _, gp) in enumerate(gt.relations):
            if gp not in totals:
                continue
            totals[gp] += 1
            if matched.get(g_idx, k) < k:
                hits[gp] += 1
    return {
        p: (hits[p] / totals[p]) if totals[p] else None
        for p in vocab.predicates
    }


def mean_recall_at_k(scene_pairs, vocab: Vocabulary, k: int,
                     split_predicates) -> float | None:
    """Mean of per-predicate recalls over split predicates with >=1 instance."""
    table = per_predicate_recall(scene_pairs, vocab, k)
    vals = [table[p] for p in split_predicates if table.get(p) is not None]
    return sum(vals) / len(vals) if vals else None


def evaluate_corpus(preds, gts, vocab: Vocabulary, protocol: str = PREDCLS,
                    iou_thresh: float = 0.5, ks=(50, 100)) -> EvalReport:
    """Full report over aligned prediction/ground-truth scene lists."""
    by_id = {g.image_id: g for g in gts}
    scene_pairs = []
    image_results = {}
    for pred in sorted(preds, key=lambda p: p.image_id):
        gt = by_id[pred.image_id]
        matched = match_triplets(pred, gt, vocab, protocol, iou_thresh)
        scene_pairs.append((matched, gt))
        image_results[pred.image_id] = (matched, len(gt.relations))

    # Per-split view: an image contributes its GT relations of that split.
    splits = {}
    for split in ("total", "base", "novel"):
        split_preds = set(vocab.split_predicates(split))
        split_img = []
        for matched, gt in scene_pairs:
            idxs = [i for i, (_, _, p) in enumerate(gt.relations)
                    if p in split_preds]
            sub = {i: matched[i] for i in idxs if i in matched}
            split_img.append((sub, len(idxs)))
        table = {
            k: {
                p: v
                for p, v in per_predicate_recall(scene_pairs, vocab, k).items()
                if p in split_preds
            }
            for k in ks
        }
        splits[split] = {
            "recall": {str(k): recall_at_k(split_img, k) for k in ks},
            "mean_recall": {
                str(k): mean_recall_at_k(scene_pairs, vocab, k,
                                         sorted(split_preds))
                for k in ks
            },
            "per_predicate": {
                p: {str(k): table[k][p] for k in ks} for p in sorted(split_preds)
            },
            "gt_count": sum(n for _, n in split_img),
        }
    return EvalReport(protocol, tuple(ks), splits)


def sweep(evaluate_fn, configs) -> list[EvalReport]:
    """One report per configuration override, tagged with the override."""
    reports = []
    for cfg in configs:
        report = evaluate_fn(cfg)
        report.metadata.update({"override": cfg})
        reports.append(report)
    return reports
