"""Eye-region detector: anchors, RPN proposals, PS-RoI head, training loop."""

from rfcnn.detection.anchors import (
    NEGATIVE,
    POSITIVE,
    Anchor,
    anchor_grid,
    anchor_shapes,
    assign_rpn_labels,
    generate_anchors,
)
from rfcnn.detection.loss import DetectorLoss, detector_loss, ohem_select
from rfcnn.detection.model import (
    FEATURE_STRIDE,
    HEAD_DELTA_STD,
    Detector,
    DetectorConfig,
    build_detector,
    feature_size,
    segment_eye_region,
)
from rfcnn.detection.train import DetectorTrainConfig, train_detector, train_step

__all__ = [
    "NEGATIVE", "POSITIVE", "Anchor", "anchor_grid", "anchor_shapes", "assign_rpn_labels",
    "generate_anchors", "DetectorLoss", "detector_loss", "ohem_select", "FEATURE_STRIDE",
    "HEAD_DELTA_STD", "Detector", "DetectorConfig", "build_detector", "feature_size",
    "segment_eye_region", "DetectorTrainConfig", "train_detector", "train_step",
]
