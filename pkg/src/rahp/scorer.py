"""Hierarchical relation scoring.

For each proposal: region prompts are dynamically selected per super-entity
pair by similarity against the union feature, entity-aware and region-aware
predicate scores are combined with weight ``alpha``, and the final score is
either the single pair fixed by the proposal's entity labels (indexed mode)
or the componentwise maximum over all pairs (max_all mode).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .embedding_store import EmbeddingMatrix, load_embeddings
from .errors import (
    DegenerateBox,
    DimensionMismatch,
    EmptySlice,
    UnknownPair,
    ZeroVector,
)
from .prompts import PromptHierarchy

MODE_INDEXED = "indexed"
MODE_MAX_ALL = "max_all"


@dataclass(frozen=True)
class ScorerConfig:
    alpha: float = 0.25
    k: int = 3
    softmax_temperature: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha={self.alpha} outside [0, 1]")
        if self.k < 1:
            raise ValueError(f"k={self.k} must be positive")
        if self.softmax_temperature <= 0:
            raise ValueError("softmax temperature must be positive")


def _check_boxes(boxes: np.ndarray, name: str) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    if not np.isfinite(boxes).all():
        raise DegenerateBox(f"{name}: non-finite box coordinates")
    if boxes.size and (
        (boxes[:, 2] <= boxes[:, 0]).any() or (boxes[:, 3] <= boxes[:, 1]).any()
    ):
        raise DegenerateBox(f"{name}: box with non-positive extent")
    return boxes


@dataclass(frozen=True)
class ProposalBatch:
    """N relation proposals with their relation (R) and union (U) features."""

    subj_boxes: np.ndarray
    obj_boxes: np.ndarray
    union_boxes: np.ndarray
    subj_labels: tuple[str | None, ...]
    obj_labels: tuple[str | None, ...]
    relation: EmbeddingMatrix            # R
    union: EmbeddingMatrix               # U
    r_index: np.ndarray = field(default=None)  # row of R per proposal
    u_index: np.ndarray = field(default=None)
    subj_probs: np.ndarray = field(default=None)
    obj_probs: np.ndarray = field(default=None)

    @classmethod
    def create(cls, subj_boxes, obj_boxes, union_boxes, subj_labels, obj_labels,
               relation, union, r_index=None, u_index=None,
               subj_probs=None, obj_probs=None) -> "ProposalBatch":
        subj_boxes = _check_boxes(subj_boxes, "subj_boxes")
        obj_boxes = _check_boxes(obj_boxes, "obj_boxes")
        union_boxes = _check_boxes(union_boxes, "union_boxes")
        n = subj_boxes.shape[0]
        if obj_boxes.shape[0] != n or union_boxes.shape[0] != n:
            raise DimensionMismatch("box arrays disagree on proposal count")
        if len(subj_labels) != n or len(obj_labels) != n:
            raise DimensionMismatch("label lists disagree on proposal count")
        if relation.dim != union.dim:
            raise DimensionMismatch(
                f"R dim {relation.dim} != U dim {union.dim}"
            )
        r_index = (np.arange(n) if r_index is None
                   else np.asarray(r_index, dtype=np.intp))
        u_index = (np.arange(n) if u_index is None
                   else np.asarray(u_index, dtype=np.intp))
        if r_index.shape[0] != n or u_index.shape[0] != n:
            raise DimensionMismatch("feature index arrays disagree on count")
        if n and (r_index.max(initial=-1) >= relation.count
                  or u_index.max(initial=-1) >= union.count
                  or r_index.min(initial=0) < 0 or u_index.min(initial=0) < 0):
            raise DimensionMismatch("feature row index out of range")
        subj_probs = (np.ones(n) if subj_probs is None
                      else np.asarray(subj_probs, dtype=np.float64))
        obj_probs = (np.ones(n) if obj_probs is None
                     else np.asarray(obj_probs, dtype=np.float64))
        return cls(subj_boxes, obj_boxes, union_boxes, tuple(subj_labels),
                   tuple(obj_labels), relation, union, r_index, u_index,
                   subj_probs, obj_probs)

    @property
    def count(self) -> int:
        return self.subj_boxes.shape[0]

    def r_rows(self, idx) -> np.ndarray:
        return self.relation.data[self.r_index[idx]]

    def u_rows(self, idx) -> np.ndarray:
        return self.union.data[self.u_index[idx]]

    @classmethod
    def load(cls, proposals_path, relation_path, union_path) -> "ProposalBatch":
        """Load from a proposals JSON file plus binary R and U matrices."""
        with open(proposals_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        rel = load_embeddings(relation_path, "binary")
        uni = load_embeddings(union_path, "binary")
        props = doc["proposals"]
        return cls.create(
            [p["subj_box"] for p in props],
            [p["obj_box"] for p in props],
            [p.get("union_box") or _union_box(p["subj_box"], p["obj_box"])
             for p in props],
            [p.get("subj_label") for p in props],
            [p.get("obj_label") for p in props],
            rel, uni,
            [p.get("r_index", i) for i, p in enumerate(props)],
            [p.get("u_index", i) for i, p in enumerate(props)],
            [p.get("subj_prob", 1.0) for p in props],
            [p.get("obj_prob", 1.0) for p in props],
        )


def _union_box(a, b):
    return [min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3])]


def select_region_prompts(u, region_emb: np.ndarray, k: int) -> np.ndarray:
    """Indices of the min(k, N_r) highest-similarity region prompts.

    Output is sorted by descending score, ties by ascending index.
    """
    u = np.asarray(u, dtype=np.float64)
    region_emb = np.asarray(region_emb, dtype=np.float64)
    if region_emb.shape[0] == 0:
        raise EmptySlice("no region prompts to select from")
    if u.shape[0] != region_emb.shape[1]:
        raise DimensionMismatch(
            f"feature dim {u.shape[0]} != prompt dim {region_emb.shape[1]}"
        )
    if np.linalg.norm(u) == 0.0:
        raise ZeroVector("union feature is the zero vector")
    scores = _kernels.cosine_matrix(u[None, :], region_emb)[0]
    return _topk(scores, k)


def _topk(scores: np.ndarray, k: int) -> np.ndarray:
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    return order[: min(k, scores.shape[0])]


def entity_score(r, entity_emb: np.ndarray) -> np.ndarray:
    """Cosine of a relation feature against a pair's C_p entity prompts."""
    r = np.asarray(r, dtype=np.float64)
    entity_emb = np.asarray(entity_emb, dtype=np.float64)
    if r.shape[0] != entity_emb.shape[1]:
        raise DimensionMismatch(
            f"feature dim {r.shape[0]} != prompt dim {entity_emb.shape[1]}"
        )
    return _kernels.cosine_matrix(r[None, :], entity_emb)[0]


def region_score_one(r, selected_emb: np.ndarray) -> float:
    """Mean cosine of ``r`` against the selected region prompt embeddings."""
    vals = _kernels.cosine_matrix(
        np.asarray(r, dtype=np.float64)[None, :],
        np.asarray(selected_emb, dtype=np.float64),
    )[0]
    return float(vals.sum() / vals.shape[0])


def region_score(r, selected_per_predicate) -> np.ndarray:
    """Per-predicate region scores; every entry must have >=1 embedding."""
    out = np.empty(len(selected_per_predicate))
    for p, sel in enumerate(selected_per_predicate):
        out[p] = region_score_one(r, sel)
    return out


def aggregate(s_e: np.ndarray, s_r: np.ndarray | None,
              alpha: float) -> np.ndarray:
    """(1-alpha)*s_e + alpha*s_r componentwise.

    ``s_r`` may be None (pair without region prompts) or carry NaN components
    (predicates without region prompts); those fall back to ``s_e``.
    """
    s_e = np.asarray(s_e, dtype=np.float64)
    if s_r is None or alpha == 0.0:
        return s_e.copy()
    s_r = np.asarray(s_r, dtype=np.float64)
    out = s_e.copy()
    present = ~np.isnan(s_r)
    if alpha == 1.0:
        out[present] = s_r[present]
    else:
        out[present] = (1.0 - alpha) * s_e[present] + alpha * s_r[present]
    return out


def final_scores(per_pair, mode: str = MODE_MAX_ALL,
                 pair=None) -> np.ndarray:
    """Reduce the per-pair aggregated scores to one C_p vector."""
    if isinstance(per_pair, dict):
        keys = list(per_pair.keys())
        if mode == MODE_INDEXED:
            if pair not in per_pair:
                raise UnknownPair(f"pair {pair!r} not present")
            return np.asarray(per_pair[pair], dtype=np.float64).copy()
        vectors = [np.asarray(per_pair[k], dtype=np.float64) for k in keys]
    else:
        vectors = [np.asarray(v, dtype=np.float64) for v in per_pair]
        if mode == MODE_INDEXED:
            raise UnknownPair("indexed mode requires a dict of pair vectors")
    if not vectors:
        raise UnknownPair("no pairs to reduce")
    return np.maximum.reduce(vectors)


def _pair_of(batch: ProposalBatch, hier: PromptHierarchy, i: int):
    """Super pair fixed by the proposal's entity labels, or None."""
    s, o = batch.subj_labels[i], batch.obj_labels[i]
    assignment = hier.smap.assignment
    if s is None or o is None or s not in assignment or o not in assignment:
        return None
    return (hier.smap.super_of(s), hier.smap.super_of(o))


def _pair_region_scores(batch, hier, cfg, pair, rows, audit):
    """(len(rows), C_p) region scores with NaN where a predicate has none."""
    preds = hier.vocab.predicates
    s_r = np.full((len(rows), len(preds)), np.nan)
    u = batch.u_rows(rows)
    r = batch.r_rows(rows)
    for p_idx, pred in enumerate(preds):
        block = hier.region_block(pair, pred)
        if block.shape[0] == 0:
            continue
        su = _kernels.cosine_matrix(u, block)
        sr = _kernels.cosine_matrix(r, block)
        prompts = hier.pairs[pair].region_prompts[pred]
        for gi in range(len(rows)):
            sel = np.sort(_topk(su[gi], cfg.k))
            vals = sr[gi, sel]
            s_r[gi, p_idx] = float(vals.sum() / vals.shape[0])
            audit[rows[gi]]["selected_prompts"][pred] = [
                prompts[j] for j in sel
            ]
    return s_r


def score_batch(batch: ProposalBatch, hier: PromptHierarchy,
                cfg: ScorerConfig):
    """Score every proposal; returns (N x C_p scores, per-proposal audit)."""
    if batch.relation.dim != hier.dim:
        raise DimensionMismatch(
            f"feature dim {batch.relation.dim} != hierarchy dim {hier.dim}"
        )
    n = batch.count
    c_p = hier.vocab.num_predicates
    scores = np.zeros((n, c_p))
    audit = [
        {"index": i, "mode": None, "pair": None, "selected_prompts": {}}
        for i in range(n)
    ]
    if n == 0:
        return scores, audit

    # Group proposals by their fixed pair; None means max_all.
    groups: dict[tuple[str, str] | None, list[int]] = {}
    for i in range(n):
        groups.setdefault(_pair_of(batch, hier, i), []).append(i)

    for pair, rows in groups.items():
        if pair is not None:
            _score_indexed_group(batch, hier, cfg, pair, rows, scores, audit)
        else:
            _score_max_all_group(batch, hier, cfg, rows, scores, audit)
    return scores, audit


def _aggregate_group(s_e, s_r, alpha):
    if s_r is None or alpha == 0.0:
        return s_e.copy()
    out = s_e.copy()
    present = ~np.isnan(s_r)
    if alpha == 1.0:
        out[present] = s_r[present]
    else:
        out[present] = (1.0 - alpha) * s_e[present] + alpha * s_r[present]
    return out


def _pair_has_regions(hier, pair) -> bool:
    return bool(hier.pairs[pair].region_rows)


def _score_indexed_group(batch, hier, cfg, pair, rows, scores, audit):
    if pair not in hier.pairs:
        raise UnknownPair(f"pair {pair!r} not in hierarchy")
    s_e = _kernels.cosine_matrix(batch.r_rows(rows), hier.entity_block(pair))
    s_r = None
    if cfg.alpha > 0.0 and _pair_has_regions(hier, pair):
        s_r = _pair_region_scores(batch, hier, cfg, pair, rows, audit)
    agg = _aggregate_group(s_e, s_r, cfg.alpha)
    for gi, i in enumerate(rows):
        scores[i] = agg[gi]
        audit[i]["mode"] = MODE_INDEXED
        audit[i]["pair"] = list(pair)


def _score_max_all_group(batch, hier, cfg, rows, scores, audit):
    pair_keys = hier.pair_keys()
    best = None
    best_pair_idx = None
    for pk_idx, pair in enumerate(pair_keys):
        s_e = _kernels.cosine_matrix(batch.r_rows(rows),
                                     hier.entity_block(pair))
        s_r = None
        if cfg.alpha > 0.0 and _pair_has_regions(hier, pair):
            # Audit selections are recorded per winning pair afterwards; use
            # a scratch audit here to avoid mixing pairs.
            scratch = [
                {"selected_prompts": {}} for _ in range(max(rows) + 1)
            ]
            s_r = _pair_region_scores(batch, hier, cfg, pair, rows, scratch)
        agg = _aggregate_group(s_e, s_r, cfg.alpha)
        if best is None:
            best = agg
            best_pair_idx = np.zeros(len(rows), dtype=np.intp)
        else:
            row_max_new = agg.max(axis=1)
            row_max_old = best.max(axis=1)
            improved = row_max_new > row_max_old
            best_pair_idx[improved] = pk_idx
            np.maximum(best, agg, out=best)
    for gi, i in enumerate(rows):
        scores[i] = best[gi]
        audit[i]["mode"] = MODE_MAX_ALL
        audit[i]["pair"] = list(pair_keys[best_pair_idx[gi]])
    # Re-record the winning pair's selections for interpretability.
    winners: dict[int, list[int]] = {}
    for gi, i in enumerate(rows):
        winners.setdefault(int(best_pair_idx[gi]), []).append(gi)
    for pk_idx, gis in winners.items():
        pair = pair_keys[pk_idx]
        if cfg.alpha > 0.0 and _pair_has_regions(hier, pair):
            sub_rows = [rows[gi] for gi in gis]
            _pair_region_scores(batch, hier, cfg, pair, sub_rows, audit)


def save_scores(path, scores: np.ndarray, audit) -> None:
    """One JSON object per proposal, in proposal order."""
    records = []
    for i, entry in enumerate(audit):
        records.append(
            {
                "index": entry["index"],
                "mode": entry["mode"],
                "pair": entry["pair"],
                "scores": [float(x) for x in scores[i]],
                "selected_prompts": entry["selected_prompts"],
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh)


def load_scores(path):
    with open(path, "r", encoding="utf-8") as fh:
        records = json.load(fh)
    scores = np.asarray([r["scores"] for r in records], dtype=np.float64)
    return scores, records
