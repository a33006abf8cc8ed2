import numpy as np
import pytest

from rfcnn.autograd import no_grad
from rfcnn.boxes import RoIBox, iou_matrix
from rfcnn.detection import (
    FEATURE_STRIDE,
    DetectorConfig,
    DetectorTrainConfig,
    anchor_grid,
    anchor_shapes,
    assign_rpn_labels,
    build_detector,
    detector_loss,
    feature_size,
    generate_anchors,
    segment_eye_region,
    train_detector,
    train_step,
)
from rfcnn.detection.anchors import IGNORE, NEGATIVE, POSITIVE
from rfcnn.errors import ConfigError, DimensionError, NoDetectionError
from rfcnn.autograd import Parameter
from rfcnn.synth import gen_split


def test_anchor_shapes_keep_area_and_ratio():
    for (w, h), (s, r) in zip(anchor_shapes((16, 32), (1, 2, 4)), [(s, r) for s in (16, 32) for r in (1, 2, 4)]):
        assert w * h == pytest.approx(s * s)
        assert w / h == pytest.approx(r)


def test_anchor_grid_count_and_order():
    grid = anchor_grid((2, 3), 8, (16, 32), (1, 2))
    assert grid.shape == (2 * 3 * 4, 4)
    centers = 0.5 * (grid[:, :2] + grid[:, 2:])
    np.testing.assert_allclose(centers[0], [4, 4])
    np.testing.assert_allclose(centers[4], [12, 4])  # next column
    np.testing.assert_allclose(centers[12], [4, 12])  # next row
    anchors = generate_anchors((2, 3), 8, (16, 32), (1, 2))
    assert anchors[5].scale_index == 0 and anchors[5].aspect_index == 1
    np.testing.assert_allclose(anchors[7].as_tuple(), grid[7])


def test_rpn_assignment():
    anchors = np.array([[0, 0, 10, 10], [0, 0, 9, 10], [5, 0, 15, 10], [50, 50, 60, 60]], dtype=float)
    labels = assign_rpn_labels(anchors, RoIBox(0, 0, 10, 10))
    assert list(labels) == [POSITIVE, POSITIVE, IGNORE, NEGATIVE]
    # a weak best match is still positive
    labels = assign_rpn_labels(anchors[2:], RoIBox(0, 0, 10, 10))
    assert list(labels) == [POSITIVE, NEGATIVE]
    assert (assign_rpn_labels(anchors, None) == NEGATIVE).all()


def test_feature_size_matches_backbone():
    model = build_detector(DetectorConfig(), 0)
    for h, w in [(96, 96), (100, 131), (256, 320)]:
        with no_grad():
            feat = model.backbone(np.zeros((3, h, w)))
        assert feat.shape[1:] == feature_size(h, w)
        assert abs(h / FEATURE_STRIDE - feat.shape[1]) < 1


def test_score_map_channels():
    model = build_detector(DetectorConfig(), 0)
    with no_grad():
        cls_maps, reg_maps = model.score_maps(model.backbone(np.zeros((3, 64, 64))))
    assert cls_maps.shape[0] == 18 and reg_maps.shape[0] == 36


def test_bad_inputs():
    model = build_detector(DetectorConfig(), 0)
    with pytest.raises(DimensionError):
        model.backbone(np.zeros((1, 64, 64)))
    with pytest.raises(DimensionError):
        model.backbone(np.zeros((3, 6, 64)))
    with pytest.raises(ConfigError):
        DetectorConfig(vote="max")


def test_detector_loss_without_positives():
    from rfcnn.autograd import Tensor

    loss = detector_loss(Tensor(np.zeros((3, 2))), [0, 0, 0], Tensor(np.zeros((3, 4))), np.zeros((3, 4)), [False] * 3)
    assert loss.reg.item() == 0.0
    assert loss.total.item() == pytest.approx(np.log(2))


def test_proposals_are_clipped_and_nms_filtered():
    model = build_detector(DetectorConfig(), 3)
    with no_grad():
        feat = model.backbone(np.random.default_rng(0).random((3, 96, 128)))
        logits, deltas = model.rpn(feat)
    rois, scores = model.proposals(logits.data, deltas.data, feat.shape[1:], (96, 128), 64)
    assert len(rois) <= 64
    assert (rois[:, 0] >= 0).all() and (rois[:, 2] <= 128).all() and (rois[:, 3] <= 96).all()
    m = iou_matrix(rois, rois)
    np.fill_diagonal(m, 0)
    assert (m <= model.cfg.nms_thresh).all()
    assert list(scores) == sorted(scores, reverse=True)


@pytest.mark.parametrize("level", [0.0, 0.5, 1.0])
def test_blank_image_is_never_searched(level):
    model = build_detector(DetectorConfig(), 0)
    # push every head towards "eye" so only the blank check can reject the image
    model.by_name["ps_cls.bias"].data[1::2] = 50.0
    with pytest.raises(NoDetectionError, match="blank"):
        segment_eye_region(model, np.full((3, 96, 128), level))
    box = segment_eye_region(model, np.random.default_rng(1).random((3, 96, 128)))
    assert 0 <= box.x0 < box.x1 <= 128 and 0 <= box.y0 < box.y1 <= 96


def test_zero_learning_rate_keeps_parameters():
    samples = gen_split(4, 0.25, 0, 0, "t")
    model = build_detector(DetectorConfig(), 0)
    before = [p.data.copy() for p in model.params]
    train_detector(samples, DetectorConfig(), DetectorTrainConfig(lr=0.0, iterations=3, weight_decay=0.0), model=model)
    for a, p in zip(before, model.params):
        np.testing.assert_array_equal(a, p.data)


def test_training_is_deterministic_and_reduces_loss_on_fixed_image():
    s = gen_split(2, 0.5, 5, 0, "t")[0]
    losses = []
    for _ in range(2):
        model = build_detector(DetectorConfig(), 0)
        run = []
        for _ in range(10):
            rng = np.random.default_rng(0)  # same anchors and jitter every step
            run.append(train_step(model, s.image, s.eye_box, rng)["total"])
            from rfcnn.autograd import fill_missing_grads, sgd_step

            fill_missing_grads(model.params)
            sgd_step(model.params, 0.001, 0.0, 0.0)
        losses.append(run)
    assert losses[0] == losses[1]
    assert losses[0][-1] < losses[0][0]
