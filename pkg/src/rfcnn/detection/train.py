"""Detector training: one image per SGD step, RPN + OHEM PS-RoI losses."""

from dataclasses import dataclass

import numpy as np

from rfcnn.autograd import (
    cross_entropy_rows,
    fill_missing_grads,
    no_grad,
    sgd_step,
    smooth_l1_loss,
    softmax_cross_entropy,
    take_rows,
)
from rfcnn.boxes import clip_boxes, encode_boxes, iou_matrix
from rfcnn.detection.anchors import NEGATIVE, POSITIVE, assign_rpn_labels
from rfcnn.detection.loss import detector_loss, ohem_select
from rfcnn.detection.model import HEAD_DELTA_STD, build_detector
from rfcnn.errors import NumericError, TrainingError
from rfcnn.synth.render import render_background


@dataclass(frozen=True)
class DetectorTrainConfig:
    lr: float = 0.0003
    momentum: float = 0.9
    weight_decay: float = 5e-4
    iterations: int = 2000
    background_every: int = 8  # every n-th step trains on a face-free scene (0 disables)
    seed: int = 0


def _smooth_l1_rows(d):
    ad = np.abs(d)
    return np.where(ad < 1.0, 0.5 * d * d, ad - 0.5).sum(axis=1)


def _jitter(gt, n, rng, width, height):
    if n <= 0:
        return np.zeros((0, 4))
    x0, y0, x1, y1 = gt.as_tuple()[:4]
    w, h = x1 - x0, y1 - y0
    cx = 0.5 * (x0 + x1) + rng.uniform(-0.12, 0.12, n) * w
    cy = 0.5 * (y0 + y1) + rng.uniform(-0.12, 0.12, n) * h
    nw = w * np.exp(rng.uniform(-0.2, 0.2, n))
    nh = h * np.exp(rng.uniform(-0.2, 0.2, n))
    boxes = np.stack([cx - nw / 2, cy - nh / 2, cx + nw / 2, cy + nh / 2], axis=1)
    return clip_boxes(boxes, width, height)


def train_step(model, image, gt, rng):
    """Forward + backward for one image; returns the loss terms as floats.

    ``gt`` is the eye RoIBox, or None for an image without eyes.
    """
    cfg = model.cfg
    _, height, width = image.shape
    feat = model.backbone(image)
    feat_hw = feat.shape[1:]
    logits, deltas = model.rpn(feat)
    anchors = model.anchors(feat_hw)

    labels = assign_rpn_labels(anchors, gt, cfg.rpn_pos_iou, cfg.rpn_neg_iou)
    pos = np.flatnonzero(labels == POSITIVE)
    neg = np.flatnonzero(labels == NEGATIVE)
    n_pos = min(len(pos), cfg.rpn_batch // 2)
    pos = np.sort(rng.choice(pos, n_pos, replace=False)) if n_pos < len(pos) else pos
    n_neg = min(len(neg), cfg.rpn_batch - n_pos)
    neg = np.sort(rng.choice(neg, n_neg, replace=False)) if n_neg < len(neg) else neg
    sampled = np.concatenate([pos, neg])
    loss = softmax_cross_entropy(take_rows(logits, sampled), labels[sampled])
    rpn_cls = loss.item()
    rpn_reg = 0.0
    if n_pos:
        reg = smooth_l1_loss(take_rows(deltas, pos), encode_boxes(np.repeat([gt.as_tuple()[:4]], n_pos, 0), anchors[pos]), float(n_pos))
        rpn_reg = reg.item()
        loss = loss + reg

    rois, _ = model.proposals(logits.data, deltas.data, feat_hw, (height, width), cfg.train_proposals)
    if gt is not None:
        gt_arr = np.array([gt.as_tuple()[:4]])
        rois = np.vstack([rois, gt_arr, _jitter(gt, cfg.jittered_gt, rng, width, height)])
        rois = rois[((rois[:, 2] - rois[:, 0]) > 0) & ((rois[:, 3] - rois[:, 1]) > 0)]
        roi_labels = (iou_matrix(rois, gt_arr)[:, 0] >= cfg.fg_iou).astype(np.int64)
        targets = encode_boxes(np.repeat(gt_arr, len(rois), 0), rois) / HEAD_DELTA_STD
    else:
        roi_labels = np.zeros(len(rois), dtype=np.int64)
        targets = np.zeros((len(rois), 4))

    det_cls = det_reg = 0.0
    if len(rois):
        cls_maps, reg_maps = model.score_maps(feat)
        with no_grad():
            probe = model.head(cls_maps, reg_maps, rois)
        per_roi = cross_entropy_rows(probe.logits.data, roi_labels)
        per_roi = per_roi + roi_labels * _smooth_l1_rows(probe.deltas.data - targets)
        sel = ohem_select(per_roi, cfg.ohem_batch)
        out = model.head(cls_maps, reg_maps, rois[sel])
        det = detector_loss(out.logits, roi_labels[sel], out.deltas, targets[sel], roi_labels[sel] == 1)
        det_cls, det_reg, _ = det.values()
        loss = loss + det.total

    loss.backward()
    return {"rpn_cls": rpn_cls, "rpn_reg": rpn_reg, "cls": det_cls, "reg": det_reg, "total": loss.item()}


def train_detector(samples, cfg, tc, on_step=None, model=None):
    """Train on ``samples`` (each with ``image`` and ``eye_box``); returns (model, history)."""
    if not samples:
        raise ValueError("detector training needs at least one sample")
    model = build_detector(cfg, tc.seed) if model is None else model
    rng = np.random.default_rng([int(tc.seed), 4])
    order = rng.permutation(len(samples))
    cursor = 0
    history = []
    for step in range(tc.iterations):
        if tc.background_every and step % tc.background_every == tc.background_every - 1:
            ref = samples[order[cursor % len(order)]]
            image = render_background(int(rng.integers(0, 2**31)), ref.image.shape[2], ref.image.shape[1])
            gt = None
        else:
            if cursor >= len(order):
                order = rng.permutation(len(samples))
                cursor = 0
            sample = samples[order[cursor]]
            cursor += 1
            image, gt = sample.image, sample.eye_box
        try:
            terms = train_step(model, image, gt, rng)
        except NumericError as exc:
            raise TrainingError(f"detector diverged at step {step}: {exc}", step=step, stage="detector") from exc
        fill_missing_grads(model.params)
        sgd_step(model.params, tc.lr, tc.momentum, tc.weight_decay)
        history.append(terms)
        if on_step is not None:
            on_step(step, terms)
    return model, history
