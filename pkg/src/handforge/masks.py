"""Binary masks and image-space bounding boxes.

Masks are plain (h, w) bool arrays; boxes use continuous corner coordinates
(x1, y1, x2, y2). Boxes derived from masks carry inclusive pixel corners,
converted losslessly to/from the on-disk [x, y, w, h] pixel-count form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError
from .geometry import PartLabel


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise InvalidSpecError(f"degenerate box {self}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def center(self) -> tuple:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def to_xywh(self) -> list:
        """On-disk pixel form: [x, y, w, h] with inclusive-corner counts."""
        return [float(self.x1), float(self.y1),
                float(self.x2 - self.x1 + 1), float(self.y2 - self.y1 + 1)]

    @classmethod
    def from_xywh(cls, xywh) -> "BBox":
        x, y, w, h = (float(v) for v in xywh)
        return cls(x, y, x + w - 1, y + h - 1)


def as_mask(bits) -> np.ndarray:
    m = np.asarray(bits)
    if m.ndim != 2:
        raise InvalidSpecError("mask must be 2-dimensional")
    return m.astype(bool)


def mask_from_instance(labels: np.ndarray, target: PartLabel = PartLabel.HAND) -> np.ndarray:
    """Binary mask of one part; all other labels (arm included) map to 0."""
    return np.asarray(labels) == int(target)


def bbox_from_mask(mask: np.ndarray):
    """Tight inclusive-corner box over set bits, or None for an empty mask."""
    m = as_mask(mask)
    rows = np.flatnonzero(m.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(m.any(axis=0))
    return BBox(float(cols[0]), float(rows[0]), float(cols[-1]), float(rows[-1]))
