"""Anchor tiling and RPN label assignment."""

from dataclasses import dataclass

import numpy as np

from rfcnn.boxes import iou_matrix

POSITIVE = 1
NEGATIVE = 0
IGNORE = -1


@dataclass(frozen=True)
class Anchor:
    cx: float
    cy: float
    width: float
    height: float
    scale_index: int
    aspect_index: int

    @property
    def x0(self):
        return self.cx - 0.5 * self.width

    @property
    def y0(self):
        return self.cy - 0.5 * self.height

    @property
    def x1(self):
        return self.cx + 0.5 * self.width

    @property
    def y1(self):
        return self.cy + 0.5 * self.height

    def as_tuple(self):
        return (self.x0, self.y0, self.x1, self.y1)


def anchor_shapes(scales, ratios):
    """(width, height) per anchor type, scale-major; ratio is width/height."""
    if len(scales) == 0 or len(ratios) == 0:
        raise ValueError("need at least one scale and one ratio")
    return [(s * np.sqrt(r), s / np.sqrt(r)) for s in scales for r in ratios]


def anchor_grid(feat_hw, stride, scales, ratios):
    """Anchors as ``[Hf*Wf*A, 4]`` boxes, ordered (row, column, anchor type)."""
    hf, wf = feat_hw
    shapes = np.array(anchor_shapes(scales, ratios))
    cy = (np.arange(hf) + 0.5) * stride
    cx = (np.arange(wf) + 0.5) * stride
    cyy, cxx = np.meshgrid(cy, cx, indexing="ij")
    ctr = np.stack([cxx, cyy], axis=-1).reshape(-1, 1, 2)
    half = 0.5 * shapes[None, :, :]
    boxes = np.concatenate([ctr - half, ctr + half], axis=-1)
    return boxes.reshape(-1, 4)


def generate_anchors(feat_hw, stride, scales, ratios):
    boxes = anchor_grid(feat_hw, stride, scales, ratios)
    n_ratio = len(ratios)
    out = []
    for i, (x0, y0, x1, y1) in enumerate(boxes):
        a = i % (len(scales) * n_ratio)
        out.append(Anchor(float(0.5 * (x0 + x1)), float(0.5 * (y0 + y1)), float(x1 - x0), float(y1 - y0), a // n_ratio, a % n_ratio))
    return out


def _boxes_of(anchors):
    if isinstance(anchors, np.ndarray):
        return anchors
    return np.array([a.as_tuple() for a in anchors], dtype=np.float64).reshape(-1, 4)


def assign_rpn_labels(anchors, gt, pos_iou=0.7, neg_iou=0.3):
    """1 positive, 0 negative, -1 ignore. The single best-overlap anchor is always positive."""
    boxes = _boxes_of(anchors)
    if gt is None:
        return np.full(len(boxes), NEGATIVE, dtype=np.int64)
    overlaps = iou_matrix(boxes, np.array([gt.as_tuple()[:4]]))[:, 0]
    labels = np.full(len(boxes), IGNORE, dtype=np.int64)
    labels[overlaps <= neg_iou] = NEGATIVE
    labels[overlaps >= pos_iou] = POSITIVE
    labels[int(np.argmax(overlaps))] = POSITIVE
    return labels
