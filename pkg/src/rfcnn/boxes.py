"""Axis-aligned box geometry: IoU, box deltas, smooth-L1, NMS.

Boxes use continuous pixel coordinates ``(x0, y0, x1, y1)`` with area
``(x1 - x0) * (y1 - y0)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from rfcnn import kernels

# exp() guard when decoding predicted size deltas
MAX_LOG_RATIO = math.log(1000.0 / 16.0)


@dataclass(frozen=True)
class RoIBox:
    x0: float
    y0: float
    x1: float
    y1: float
    score: float = 0.0

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"invalid box {self.as_tuple()}: need x0 < x1 and y0 < y1")

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    def as_tuple(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def as_array(self):
        return np.array(self.as_tuple(), dtype=np.float64)

    def clip(self, width, height):
        return RoIBox(
            min(max(self.x0, 0.0), width),
            min(max(self.y0, 0.0), height),
            min(max(self.x1, 0.0), width),
            min(max(self.y1, 0.0), height),
            self.score,
        )

    def contains_point(self, x, y):
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


@dataclass(frozen=True)
class BoxDelta:
    tx: float
    ty: float
    tw: float
    th: float

    def as_array(self):
        return np.array([self.tx, self.ty, self.tw, self.th], dtype=np.float64)


@dataclass(frozen=True)
class Detection:
    box: RoIBox
    prob: float


def iou(a, b):
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.width * a.height + b.width * b.height - inter)


def iou_matrix(a, b):
    """Pairwise IoU of ``a[N,4]`` against ``b[M,4]``."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)


def _center_form(boxes):
    w = boxes[..., 2] - boxes[..., 0]
    h = boxes[..., 3] - boxes[..., 1]
    return boxes[..., 0] + 0.5 * w, boxes[..., 1] + 0.5 * h, w, h


def encode_boxes(boxes, refs):
    """Deltas ``[N,4]`` taking reference boxes ``refs[N,4]`` to ``boxes[N,4]``."""
    cx, cy, w, h = _center_form(np.asarray(boxes, dtype=np.float64))
    ax, ay, aw, ah = _center_form(np.asarray(refs, dtype=np.float64))
    if (w <= 0).any() or (h <= 0).any() or (aw <= 0).any() or (ah <= 0).any():
        raise ValueError("box and anchor extents must be positive")
    return np.stack([(cx - ax) / aw, (cy - ay) / ah, np.log(w / aw), np.log(h / ah)], axis=-1)


def decode_boxes(deltas, refs, clamp=False):
    deltas = np.asarray(deltas, dtype=np.float64)
    ax, ay, aw, ah = _center_form(np.asarray(refs, dtype=np.float64))
    tw, th = deltas[..., 2], deltas[..., 3]
    if clamp:
        tw = np.minimum(tw, MAX_LOG_RATIO)
        th = np.minimum(th, MAX_LOG_RATIO)
    cx = deltas[..., 0] * aw + ax
    cy = deltas[..., 1] * ah + ay
    w = aw * np.exp(tw)
    h = ah * np.exp(th)
    return np.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], axis=-1)


def encode_box(box, anchor):
    """Regression target of ``box`` relative to an anchor (or any box-like with x0..y1)."""
    d = encode_boxes(np.array([box.as_tuple()]), np.array([_xyxy(anchor)]))[0]
    return BoxDelta(*map(float, d))


def decode_box(delta, anchor):
    b = decode_boxes(delta.as_array()[None], np.array([_xyxy(anchor)]))[0]
    return RoIBox(*map(float, b))


def _xyxy(obj):
    if hasattr(obj, "as_tuple"):
        return obj.as_tuple()[:4]
    return (obj.x0, obj.y0, obj.x1, obj.y1)


def smooth_l1(pred, target):
    """Summed smooth-L1 over the four delta coordinates."""
    d = np.abs(pred.as_array() - target.as_array())
    return float(np.where(d < 1.0, 0.5 * d * d, d - 0.5).sum())


def clip_boxes(boxes, width, height):
    boxes = np.array(boxes, dtype=np.float64)
    boxes[:, 0::2] = np.clip(boxes[:, 0::2], 0.0, width)
    boxes[:, 1::2] = np.clip(boxes[:, 1::2], 0.0, height)
    return boxes


def nms_indices(boxes, scores, iou_thresh):
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    if boxes.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return kernels.nms(boxes, np.asarray(scores, dtype=np.float64), float(iou_thresh))


def nms(dets, iou_thresh):
    """Greedy non-maximum suppression over :class:`Detection` objects."""
    if not dets:
        return []
    boxes = np.array([d.box.as_tuple() for d in dets])
    scores = np.array([d.prob for d in dets])
    return [dets[i] for i in nms_indices(boxes, scores, iou_thresh)]
