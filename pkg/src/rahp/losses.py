"""Forward values and analytic gradients for the training loss stack.

Every gradient here is checked against central finite differences in the test
suite and by the ``loss-check`` CLI subcommand.  Note the box loss uses
``1 - GIoU`` so identical boxes cost zero; subgradients at L1 kinks and at
min/max ties are fixed to one branch for determinism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBox, DimensionMismatch, IndexOutOfRange


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(np.isfinite(v) for v in vals):
            raise DegenerateBox(f"non-finite box {vals}")
        if self.x2 <= self.x1 or self.y2 <= self.y1:
            raise DegenerateBox(f"box {vals} has non-positive extent")

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=np.float64)

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 2.0
    lambda2: float = 1.0
    lambda3: float = 20.0

    def __post_init__(self):
        for v in (self.lambda1, self.lambda2, self.lambda3):
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"loss weight {v} must be finite and >= 0")


def iou(b: BBox, g: BBox) -> float:
    iw = max(0.0, min(b.x2, g.x2) - max(b.x1, g.x1))
    ih = max(0.0, min(b.y2, g.y2) - max(b.y1, g.y1))
    inter = iw * ih
    return inter / (b.area + g.area - inter)


def giou(b: BBox, g: BBox) -> float:
    """Generalized IoU in (-1, 1]; equals IoU for touching enclosures."""
    value, _ = giou_with_grad(b, g)
    return value


def giou_with_grad(b: BBox, g: BBox):
    """GIoU and its gradient w.r.t. (b.x1, b.y1, b.x2, b.y2)."""
    ix1, dix1 = (b.x1, (1.0, 0.0)) if b.x1 > g.x1 else (g.x1, (0.0, 0.0))
    ix2, dix2 = (b.x2, (0.0, 1.0)) if b.x2 < g.x2 else (g.x2, (0.0, 0.0))
    iy1, diy1 = (b.y1, (1.0, 0.0)) if b.y1 > g.y1 else (g.y1, (0.0, 0.0))
    iy2, diy2 = (b.y2, (0.0, 1.0)) if b.y2 < g.y2 else (g.y2, (0.0, 0.0))

    iw = max(0.0, ix2 - ix1)
    ih = max(0.0, iy2 - iy1)
    inter = iw * ih
    # d(inter)/d(b coords); zero when the overlap is already empty
    d_inter = np.zeros(4)
    if iw > 0.0 and ih > 0.0:
        d_inter[0] = ih * (dix2[0] - dix1[0])
        d_inter[2] = ih * (dix2[1] - dix1[1])
        d_inter[1] = iw * (diy2[0] - diy1[0])
        d_inter[3] = iw * (diy2[1] - diy1[1])

    area_b = b.area
    d_area_b = np.array(
        [-(b.y2 - b.y1), -(b.x2 - b.x1), b.y2 - b.y1, b.x2 - b.x1]
    )
    union = area_b + g.area - inter
    d_union = d_area_b - d_inter

    iou_val = inter / union
    d_iou = (d_inter * union - inter * d_union) / union**2

    # Smallest enclosing box
    ex1, dex1 = (b.x1, 1.0) if b.x1 < g.x1 else (g.x1, 0.0)
    ey1, dey1 = (b.y1, 1.0) if b.y1 < g.y1 else (g.y1, 0.0)
    ex2, dex2 = (b.x2, 1.0) if b.x2 > g.x2 else (g.x2, 0.0)
    ey2, dey2 = (b.y2, 1.0) if b.y2 > g.y2 else (g.y2, 0.0)
    area_c = (ex2 - ex1) * (ey2 - ey1)
    d_area_c = np.array(
        [
            -(ey2 - ey1) * dex1,
            -(ex2 - ex1) * dey1,
            (ey2 - ey1) * dex2,
            (ex2 - ex1) * dey2,
        ]
    )

    # giou = iou - (area_c - union) / area_c = iou - 1 + union / area_c
    value = iou_val - 1.0 + union / area_c
    grad = d_iou + (d_union * area_c - union * d_area_c) / area_c**2
    return value, grad


def bbox_loss(b: BBox, b_gt: BBox):
    """L1 + (1 - GIoU) regression loss and its gradient w.r.t. ``b``."""
    diff = b.as_array() - b_gt.as_array()
    l1 = float(np.abs(diff).sum())
    g, dg = giou_with_grad(b, b_gt)
    value = l1 + (1.0 - g)
    grad = np.sign(diff) - dg
    return value, grad


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def entity_ce(logits, target: int):
    """Cross-entropy over entity logits; grad = softmax - onehot."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= target < logits.shape[0]:
        raise IndexOutOfRange(f"target {target} for {logits.shape[0]} classes")
    logp = _log_softmax(logits)
    grad = np.exp(logp)
    grad[target] -= 1.0
    return -logp[target], grad


def predicate_focal(logits, target: int, gamma: float = 2.0,
                    balance: float = 0.25):
    """Focal loss -balance*(1-p_t)^gamma*log(p_t) over predicate logits.

    gamma=0, balance=1 reduces bitwise to ``entity_ce``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= target < logits.shape[0]:
        raise IndexOutOfRange(f"target {target} for {logits.shape[0]} classes")
    if gamma == 0.0:
        value, grad = entity_ce(logits, target)
        if balance == 1.0:
            return value, grad
        return balance * value, balance * grad

    logp = _log_softmax(logits)
    probs = np.exp(logp)
    p = probs[target]
    one_m_p = 1.0 - p
    value = -balance * one_m_p**gamma * logp[target]
    # dL/dp, then chain through dp/dlogit_j = p * (delta_tj - s_j)
    if one_m_p == 0.0:
        # p_t == 1: loss is exactly 0 and flat for gamma >= 1
        dl_dp_times_p = -balance if gamma < 1.0 else 0.0
    else:
        dl_dp_times_p = -balance * (
            -gamma * one_m_p ** (gamma - 1.0) * logp[target] * p
            + one_m_p**gamma
        )
    delta = np.zeros_like(probs)
    delta[target] = 1.0
    grad = dl_dp_times_p * (delta - probs)
    return value, grad


def distill_l1(r, v):
    """L1 distance between a relation feature and a VLM visual feature."""
    r = np.asarray(r, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if r.shape != v.shape:
        raise DimensionMismatch(f"shapes {r.shape} and {v.shape}")
    diff = r - v
    return float(np.abs(diff).sum()), np.sign(diff)


def total_loss(bbox: float, ent: float, pre: float, distill: float,
               w: LossWeights) -> float:
    """Weighted sum: bbox + l1*ent + l2*pre + l3*distill."""
    return bbox + w.lambda1 * ent + w.lambda2 * pre + w.lambda3 * distill
