"""Axis-aligned bounding boxes, IoU overlap, and non-maximum suppression.

Boxes are continuous-valued (sub-pixel); nothing here snaps to integer
pixel grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoxTLWH:
    """Box as (left, top, width, height) in pixels. Width and height > 0."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(
                f"box must have positive size, got width={self.width}, height={self.height}"
            )

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class BoxXYAH:
    """Box as (center_x, center_y, aspect, height); aspect = width / height.

    This is the measurement parameterization used by the Kalman filter.
    """

    center_x: float
    center_y: float
    aspect: float
    height: float

    def __post_init__(self):
        if not (self.aspect > 0 and self.height > 0):
            raise ValueError(
                f"box must have positive aspect and height, got aspect={self.aspect}, "
                f"height={self.height}"
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.center_x, self.center_y, self.aspect, self.height], dtype=float)


def tlwh_to_xyah(b: BoxTLWH) -> BoxXYAH:
    return BoxXYAH(
        center_x=b.left + b.width / 2.0,
        center_y=b.top + b.height / 2.0,
        aspect=b.width / b.height,
        height=b.height,
    )


def xyah_to_tlwh(b: BoxXYAH) -> BoxTLWH:
    width = b.aspect * b.height
    return BoxTLWH(
        left=b.center_x - width / 2.0,
        top=b.center_y - b.height / 2.0,
        width=width,
        height=b.height,
    )


def iou(a: BoxTLWH, b: BoxTLWH) -> float:
    """Intersection over union in [0, 1].

    Boxes that share only an edge have IoU 0 (open intersection).
    """
    iw = min(a.right, b.right) - max(a.left, b.left)
    if iw <= 0:
        return 0.0
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if ih <= 0:
        return 0.0
    inter = iw * ih
    # round-off can push the ratio a hair past 1 for near-identical boxes
    return min(1.0, inter / (a.area + b.area - inter))


def iou_matrix(boxes_a: list[BoxTLWH], boxes_b: list[BoxTLWH]) -> np.ndarray:
    """Pairwise IoU, shape (len(boxes_a), len(boxes_b))."""
    out = np.zeros((len(boxes_a), len(boxes_b)), dtype=float)
    for i, a in enumerate(boxes_a):
        for j, b in enumerate(boxes_b):
            out[i, j] = iou(a, b)
    return out


def nms(boxes: list[BoxTLWH], scores: list[float], iou_threshold: float) -> list[int]:
    """Greedy non-maximum suppression; returns kept indices in ascending order.

    Boxes are visited in descending score order (score ties broken by lower
    input index); a box is suppressed if its IoU with an already-kept box
    exceeds ``iou_threshold``.
    """
    if len(boxes) != len(scores):
        raise ValueError(f"got {len(boxes)} boxes but {len(scores)} scores")
    if not (0.0 <= iou_threshold <= 1.0):
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")

    order = sorted(range(len(boxes)), key=lambda i: (-scores[i], i))
    kept: list[int] = []
    for i in order:
        if all(iou(boxes[i], boxes[j]) <= iou_threshold for j in kept):
            kept.append(i)
    return sorted(kept)
