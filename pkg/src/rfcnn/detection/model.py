"""Eye-region detector: small conv backbone, RPN, position-sensitive RoI head.

Backbone (stride 8)::

    conv1 3x3/2 relu  pool 2x2  conv2 3x3 relu  pool 2x2  conv3 3x3 relu  conv4 3x3 relu

The RPN scores and regresses ``A = |scales| * |ratios|`` anchors per feature
cell. The RoI head is fully convolutional: 1x1 convs produce ``k*k*2`` class
score maps and ``k*k*4`` box-delta maps, which are PS-RoI pooled and voted.
"""

from dataclasses import asdict, dataclass

import numpy as np

from rfcnn.autograd import Parameter, Tensor, conv2d, he_normal, maxpool2d, no_grad, relu, reshape, softmax, transpose
from rfcnn.boxes import RoIBox, clip_boxes, decode_boxes, nms_indices
from rfcnn.detection.anchors import anchor_grid
from rfcnn.errors import ConfigError, DimensionError, NoDetectionError
from rfcnn.psroi import psroi_pool_op, vote_op

FEATURE_STRIDE = 8
# per-coordinate scale of the head's regression targets
HEAD_DELTA_STD = np.array([0.1, 0.1, 0.2, 0.2])
# images whose pixel range is below this are featureless and never searched
BLANK_RANGE = 2.0 / 255.0


@dataclass(frozen=True)
class DetectorConfig:
    backbone_channels: tuple = (16, 32, 64, 64)
    rpn_channels: int = 64
    anchor_scales: tuple = (16.0, 32.0, 64.0)
    anchor_ratios: tuple = (1.0, 2.0, 4.0)
    k: int = 3
    vote: str = "mean"
    rpn_pos_iou: float = 0.7
    rpn_neg_iou: float = 0.3
    rpn_batch: int = 64
    pre_nms_top: int = 600
    nms_thresh: float = 0.3
    train_proposals: int = 64
    test_proposals: int = 64
    fg_iou: float = 0.5
    ohem_batch: int = 16
    jittered_gt: int = 4
    prob_floor: float = 0.05
    min_box: float = 4.0

    def __post_init__(self):
        if len(self.backbone_channels) != 4:
            raise ConfigError("the backbone has exactly four conv blocks")
        if self.k < 1 or self.ohem_batch < 1 or self.rpn_batch < 2:
            raise ConfigError("k, ohem_batch must be >= 1 and rpn_batch >= 2")
        if not self.anchor_scales or not self.anchor_ratios:
            raise ConfigError("need at least one anchor scale and ratio")
        if self.vote not in ("mean", "sum"):
            raise ConfigError("vote must be 'mean' or 'sum'")

    @property
    def num_anchors(self):
        return len(self.anchor_scales) * len(self.anchor_ratios)

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def feature_size(height, width):
    def side(n):
        return ((n - 1) // 2 + 1) // 2 // 2

    return side(height), side(width)


@dataclass
class HeadOutput:
    rois: np.ndarray  # [R,4] image pixels
    logits: Tensor  # [R,2]
    deltas: Tensor  # [R,4] scaled by HEAD_DELTA_STD


class Detector:
    def __init__(self, cfg, params):
        self.cfg = cfg
        self.params = params
        self.by_name = {p.name: p for p in params}
        self._anchor_cache = {}

    def _conv(self, x, name, stride=1, padding=0):
        return conv2d(x, self.by_name[f"{name}.weight"], self.by_name[f"{name}.bias"], stride=stride, padding=padding)

    def backbone(self, image):
        if image.ndim != 3 or image.shape[0] != 3:
            raise DimensionError(f"detector input must be [3,H,W], got {image.shape}")
        hf, wf = feature_size(*image.shape[1:])
        if hf < 1 or wf < 1:
            raise DimensionError(f"image {image.shape[1]}x{image.shape[2]} too small for stride {FEATURE_STRIDE}")
        x = Tensor(image - 0.5)
        h = maxpool2d(relu(self._conv(x, "conv1", stride=2, padding=1)), 2)
        h = maxpool2d(relu(self._conv(h, "conv2", padding=1)), 2)
        h = relu(self._conv(h, "conv3", padding=1))
        return relu(self._conv(h, "conv4", padding=1))

    def anchors(self, feat_hw):
        if feat_hw not in self._anchor_cache:
            self._anchor_cache[feat_hw] = anchor_grid(feat_hw, FEATURE_STRIDE, self.cfg.anchor_scales, self.cfg.anchor_ratios)
        return self._anchor_cache[feat_hw]

    def rpn(self, feat):
        """Anchor logits ``[Hf*Wf*A, 2]`` and deltas ``[Hf*Wf*A, 4]``."""
        r = relu(self._conv(feat, "rpn_conv", padding=1))
        cls = transpose(self._conv(r, "rpn_cls"), (1, 2, 0))
        reg = transpose(self._conv(r, "rpn_reg"), (1, 2, 0))
        return reshape(cls, (-1, 2)), reshape(reg, (-1, 4))

    def score_maps(self, feat):
        return self._conv(feat, "ps_cls"), self._conv(feat, "ps_reg")

    def proposals(self, rpn_logits, rpn_deltas, feat_hw, image_hw, top_n):
        """Decoded, clipped, NMS-filtered proposals (no gradient)."""
        anchors = self.anchors(feat_hw)
        scores = softmax(rpn_logits)[:, 1]
        boxes = clip_boxes(decode_boxes(rpn_deltas, anchors, clamp=True), image_hw[1], image_hw[0])
        keep = ((boxes[:, 2] - boxes[:, 0]) >= self.cfg.min_box) & ((boxes[:, 3] - boxes[:, 1]) >= self.cfg.min_box)
        idx = np.flatnonzero(keep)
        idx = idx[np.argsort(-scores[idx], kind="stable")[: self.cfg.pre_nms_top]]
        kept = nms_indices(boxes[idx], scores[idx], self.cfg.nms_thresh)[:top_n]
        return boxes[idx[kept]], scores[idx[kept]]

    def head(self, cls_maps, reg_maps, rois):
        k = self.cfg.k
        logits = vote_op(psroi_pool_op(cls_maps, rois, k, 2, FEATURE_STRIDE), self.cfg.vote)
        deltas = vote_op(psroi_pool_op(reg_maps, rois, k, 4, FEATURE_STRIDE), self.cfg.vote)
        return HeadOutput(rois=rois, logits=logits, deltas=deltas)

    def detect(self, image):
        """All scored detections ``(boxes[R,4], eye_prob[R])`` after NMS, best first."""
        _, h, w = image.shape
        with no_grad():
            feat = self.backbone(image)
            feat_hw = feat.shape[1:]
            logits, deltas = self.rpn(feat)
            rois, _ = self.proposals(logits.data, deltas.data, feat_hw, (h, w), self.cfg.test_proposals)
            if len(rois) == 0:
                return np.zeros((0, 4)), np.zeros(0)
            cls_maps, reg_maps = self.score_maps(feat)
            out = self.head(cls_maps, reg_maps, rois)
        probs = softmax(out.logits.data)[:, 1]
        boxes = clip_boxes(decode_boxes(out.deltas.data * HEAD_DELTA_STD, rois, clamp=True), w, h)
        valid = ((boxes[:, 2] - boxes[:, 0]) > 0) & ((boxes[:, 3] - boxes[:, 1]) > 0)
        boxes, probs = boxes[valid], probs[valid]
        keep = nms_indices(boxes, probs, self.cfg.nms_thresh)
        return boxes[keep], probs[keep]


def build_detector(cfg, seed=0):
    rng = np.random.default_rng([int(seed), 1])
    params = []

    def conv(name, c_out, c_in, k, std=None):
        fan_in = c_in * k * k
        w = he_normal(rng, (c_out, c_in, k, k), fan_in) if std is None else rng.standard_normal((c_out, c_in, k, k)) * std
        params.append(Parameter(w, name=f"{name}.weight"))
        params.append(Parameter(np.zeros(c_out), name=f"{name}.bias"))

    c1, c2, c3, c4 = cfg.backbone_channels
    conv("conv1", c1, 3, 3)
    conv("conv2", c2, c1, 3)
    conv("conv3", c3, c2, 3)
    conv("conv4", c4, c3, 3)
    conv("rpn_conv", cfg.rpn_channels, c4, 3)
    a = cfg.num_anchors
    conv("rpn_cls", 2 * a, cfg.rpn_channels, 1, std=0.01)
    conv("rpn_reg", 4 * a, cfg.rpn_channels, 1, std=0.01)
    conv("ps_cls", cfg.k * cfg.k * 2, c4, 1, std=0.01)
    conv("ps_reg", cfg.k * cfg.k * 4, c4, 1, std=0.01)
    return Detector(cfg, params)


def segment_eye_region(model, image):
    """Highest-probability eye box, clipped to the image.

    Raises NoDetectionError for a blank (featureless) image or when no
    detection reaches the probability floor.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.size and float(np.ptp(image)) < BLANK_RANGE:
        raise NoDetectionError("blank image")
    boxes, probs = model.detect(image)
    if len(probs) == 0 or probs[0] < model.cfg.prob_floor:
        best = float(probs[0]) if len(probs) else 0.0
        raise NoDetectionError(f"no eye region above probability {model.cfg.prob_floor} (best {best:.4f})")
    x0, y0, x1, y1 = (float(v) for v in boxes[0])
    return RoIBox(x0, y0, x1, y1, score=float(probs[0]))
