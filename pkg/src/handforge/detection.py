"""Proposal/classification-stage math as a standalone kit: anchor grids,
IoU, anchor labeling, delta regression coding, ROI sampling and the five
loss terms whose unweighted sum drives training.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, HandforgeError, InvalidSpecError
from .masks import BBox

ANCHORS_PER_POSITION = 15
DEFAULT_SCALES = (32.0, 64.0, 128.0, 256.0, 512.0)
DEFAULT_RATIOS = (0.5, 1.0, 2.0)
LOG_EPS = 1e-12


@dataclass(frozen=True)
class Anchor:
    box: BBox
    scale: float
    ratio: float


class AnchorLabel(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"


@dataclass(frozen=True)
class Delta:
    """Box regression parameters: center offsets and log size ratios."""

    dx: float
    dy: float
    dw: float
    dh: float

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dw, self.dh], dtype=np.float64)


@dataclass(frozen=True)
class RoiSamplingConfig:
    n: int = 64
    positive_fraction: float = 0.33

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("roi count must be >= 1")
        if not (0.0 < self.positive_fraction < 1.0):
            raise ConfigError("positive fraction must be in (0, 1)")


@dataclass(frozen=True)
class LossBreakdown:
    rpn_class_loss: float = 0.0
    rpn_bbox_loss: float = 0.0
    mrcnn_class_loss: float = 0.0
    mrcnn_bbox_loss: float = 0.0
    mrcnn_mask_loss: float = 0.0

    @property
    def total(self) -> float:
        return (self.rpn_class_loss + self.rpn_bbox_loss + self.mrcnn_class_loss
                + self.mrcnn_bbox_loss + self.mrcnn_mask_loss)

    def as_tuple(self) -> tuple:
        return (self.rpn_class_loss, self.rpn_bbox_loss, self.mrcnn_class_loss,
                self.mrcnn_bbox_loss, self.mrcnn_mask_loss)


def total_loss(b: LossBreakdown) -> float:
    """Unweighted sum of the five loss terms."""
    return b.total


# ---------------------------------------------------------------------------
# Anchors
# ---------------------------------------------------------------------------

def generate_anchors(feature_shape, stride: float,
                     scales=DEFAULT_SCALES, ratios=DEFAULT_RATIOS) -> list[Anchor]:
    """15 anchors (5 scales x 3 ratios) centered on every feature-map cell.

    Anchor (i, j, scale, ratio) is centered at ((j+0.5)*stride, (i+0.5)*stride)
    with area scale^2 and aspect width/height = ratio.
    """
    fh, fw = int(feature_shape[0]), int(feature_shape[1])
    if fh < 1 or fw < 1:
        raise ConfigError("feature map must be at least 1x1")
    if len(scales) * len(ratios) != ANCHORS_PER_POSITION:
        raise ConfigError(
            f"anchor family must have exactly {ANCHORS_PER_POSITION} combinations, "
            f"got {len(scales)}x{len(ratios)}")
    out = []
    for i in range(fh):
        cy = (i + 0.5) * stride
        for j in range(fw):
            cx = (j + 0.5) * stride
            for s in scales:
                for r in ratios:
                    w = s * math.sqrt(r)
                    h = s / math.sqrt(r)
                    out.append(Anchor(
                        box=BBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0),
                        scale=float(s), ratio=float(r)))
    return out


def iou_box(a: BBox, b: BBox) -> float:
    """Intersection over union of two continuous-coordinate boxes."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.width * a.height + b.width * b.height - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def label_anchors(anchors, gt_boxes, pos: float = 0.7, neg: float = 0.3) -> list[AnchorLabel]:
    """Threshold labeling on max IoU over ground truth, plus the forced-match
    rule: the highest-IoU anchor for each gt box is positive regardless."""
    if not (0.0 <= neg < pos <= 1.0):
        raise ConfigError(f"need 0 <= neg < pos <= 1, got neg={neg} pos={pos}")
    boxes = [a.box if isinstance(a, Anchor) else a for a in anchors]
    if not boxes:
        raise HandforgeError("label_anchors needs at least one anchor")
    if not gt_boxes:
        return [AnchorLabel.NEGATIVE] * len(boxes)

    iou = np.array([[iou_box(a, g) for g in gt_boxes] for a in boxes], dtype=np.float64)
    best = iou.max(axis=1)
    labels = []
    for v in best:
        if v > pos:
            labels.append(AnchorLabel.POSITIVE)
        elif v < neg:
            labels.append(AnchorLabel.NEGATIVE)
        else:
            labels.append(AnchorLabel.NEUTRAL)
    for g in range(iou.shape[1]):
        labels[int(iou[:, g].argmax())] = AnchorLabel.POSITIVE
    return labels


# ---------------------------------------------------------------------------
# Delta coding
# ---------------------------------------------------------------------------

def _center_size(box: BBox):
    return ((box.x1 + box.x2) / 2.0, (box.y1 + box.y2) / 2.0,
            box.x2 - box.x1, box.y2 - box.y1)


def encode_deltas(anchor: BBox, gt: BBox) -> Delta:
    ax, ay, aw, ah = _center_size(anchor)
    if aw <= 0.0 or ah <= 0.0:
        raise InvalidSpecError("anchor must have positive width and height")
    gx, gy, gw, gh = _center_size(gt)
    if gw <= 0.0 or gh <= 0.0:
        raise InvalidSpecError("gt box must have positive width and height")
    return Delta(dx=(gx - ax) / aw, dy=(gy - ay) / ah,
                 dw=math.log(gw / aw), dh=math.log(gh / ah))


def decode_deltas(anchor: BBox, d: Delta) -> BBox:
    ax, ay, aw, ah = _center_size(anchor)
    if aw <= 0.0 or ah <= 0.0:
        raise InvalidSpecError("anchor must have positive width and height")
    cx = ax + d.dx * aw
    cy = ay + d.dy * ah
    w = aw * math.exp(d.dw)
    h = ah * math.exp(d.dh)
    return BBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)


# ---------------------------------------------------------------------------
# ROI sampling
# ---------------------------------------------------------------------------

def sample_rois(labels, cfg: RoiSamplingConfig, rng: np.random.Generator) -> np.ndarray:
    """Pick at most cfg.n anchor indices with a capped positive share; any
    shortfall is filled with negatives (always available via background)."""
    labels = list(labels)
    pos_idx = np.array([i for i, l in enumerate(labels) if l == AnchorLabel.POSITIVE])
    neg_idx = np.array([i for i, l in enumerate(labels) if l == AnchorLabel.NEGATIVE])
    if len(pos_idx) == 0 and len(neg_idx) == 0:
        raise HandforgeError("no positive or negative candidates to sample")
    n_pos = min(len(pos_idx), math.ceil(cfg.n * cfg.positive_fraction))
    chosen_pos = rng.choice(pos_idx, size=n_pos, replace=False) if n_pos else np.array([], dtype=int)
    n_neg = min(len(neg_idx), cfg.n - n_pos)
    chosen_neg = rng.choice(neg_idx, size=n_neg, replace=False) if n_neg else np.array([], dtype=int)
    return np.concatenate([chosen_pos, chosen_neg]).astype(int)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def cross_entropy(y, y_hat) -> float:
    """Multinomial cross-entropy -sum(y_i * ln p_i) with log clamping."""
    y = np.asarray(y, dtype=np.float64)
    p = np.clip(np.asarray(y_hat, dtype=np.float64), LOG_EPS, 1.0)
    if y.shape != p.shape:
        raise InvalidSpecError("class vectors must have matching length")
    return float(-(y * np.log(p)).sum())


def huber(z, z_hat) -> float:
    """Elementwise Huber (smooth-L1) over the 4 delta components, summed."""
    a = z.as_array() if isinstance(z, Delta) else np.asarray(z, dtype=np.float64)
    b = z_hat.as_array() if isinstance(z_hat, Delta) else np.asarray(z_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidSpecError("delta vectors must have matching shape")
    d = np.abs(a - b)
    per = np.where(d < 1.0, 0.5 * d * d, d - 0.5)
    return float(per.sum())


def mask_loss(pred, gt) -> float:
    """Mean per-pixel binary cross-entropy over the mask grid."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise InvalidSpecError(f"mask shapes differ: {p.shape} vs {g.shape}")
    p = np.clip(p, LOG_EPS, 1.0 - LOG_EPS)
    ce = -(g * np.log(p) + (1.0 - g) * np.log(1.0 - p))
    return float(ce.mean())
