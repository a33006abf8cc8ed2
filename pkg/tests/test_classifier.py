import numpy as np
import pytest

from rfcnn.classifier import (
    ClassifierConfig,
    TrainConfig,
    build_network,
    predict,
    predict_batch,
    trace_shapes,
    train_classifier,
)
from rfcnn.errors import ConfigError, DimensionError, TrainingError
from rfcnn.imageops import crop_resize, normalize, prepare_crop
from rfcnn.synth import gen_split


def test_layer_sequence_at_paper_size():
    sides = trace_shapes(ClassifierConfig(input_side=224))
    assert [name for name, _ in sides] == ["conv1", "pool1", "conv2", "pool2", "conv3", "conv4", "conv5", "pool3"]
    assert sides[0] == ("conv1", 222)
    net = build_network(ClassifierConfig(input_side=224), 0)
    assert [p.name for p in net.params][-2:] == ["fc3.weight", "fc3.bias"]
    assert len(net.params) == 16


def test_underflow_names_the_layer():
    with pytest.raises(ConfigError, match="pool3"):
        trace_shapes(ClassifierConfig(input_side=34))
    with pytest.raises(ConfigError):
        ClassifierConfig(fc_widths=(10, 10, 3))
    with pytest.raises(ConfigError):
        ClassifierConfig(loss="hinge")
    with pytest.raises(ConfigError):
        TrainConfig(batch=0)


def test_defaults_follow_training_setup():
    tc = TrainConfig()
    assert (tc.lr, tc.batch, tc.iterations, tc.momentum, tc.weight_decay, tc.dropout) == (0.01, 32, 5000, 0.9, 5e-4, 0.5)


def test_zero_iterations_leave_network_unchanged():
    net = build_network(ClassifierConfig(input_side=40), 0)
    before = [p.data.copy() for p in net.params]
    crops = np.random.default_rng(0).standard_normal((4, 3, 40, 40))
    _, hist = train_classifier(net, crops, [0, 1, 0, 1], TrainConfig(iterations=0))
    assert hist == []
    for a, p in zip(before, net.params):
        np.testing.assert_array_equal(a, p.data)


def test_predict_checks_shape_and_is_repeatable():
    net = build_network(ClassifierConfig(input_side=40), 0)
    crop = np.random.default_rng(1).standard_normal((3, 40, 40))
    a, b = predict(net, crop), predict(net, crop)
    assert a == b
    assert a.prob_strabismus + a.prob_normal == pytest.approx(1.0)
    assert predict_batch(net, crop[None])[0] == a.prob_strabismus
    assert len(predict_batch(net, np.zeros((0, 3, 40, 40)))) == 0
    with pytest.raises(DimensionError):
        predict(net, np.zeros((3, 41, 40)))


def test_training_needs_both_classes():
    net = build_network(ClassifierConfig(input_side=40), 0)
    with pytest.raises(ValueError):
        train_classifier(net, np.zeros((2, 3, 40, 40)), [1, 1], TrainConfig(iterations=1))


def test_divergence_reports_step():
    net = build_network(ClassifierConfig(input_side=40), 0)
    crops = np.random.default_rng(0).standard_normal((8, 3, 40, 40)) * 1e3
    with np.errstate(all="ignore"), pytest.raises(TrainingError) as info:
        train_classifier(net, crops, [0, 1] * 4, TrainConfig(lr=1e6, batch=4, iterations=50))
    assert info.value.stage == "classifier" and info.value.step is not None


def test_crop_resize_and_normalize():
    img = np.zeros((3, 20, 30))
    img[:, 5:15, 10:20] = 1.0
    crop = crop_resize(img, (10, 5, 20, 15), 8)
    np.testing.assert_allclose(crop, 1.0)
    z = normalize(np.random.default_rng(0).random((3, 16, 16)))
    np.testing.assert_allclose(z.mean(axis=(1, 2)), 0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=(1, 2)), 1, atol=1e-9)
    assert np.isfinite(normalize(np.ones((3, 4, 4)))).all()


@pytest.fixture(scope="module")
def strip_crops():
    samples = gen_split(200, 0.3, 21, 0, "c")
    crops = np.stack([prepare_crop(s.image, s.eye_box.as_tuple(), 40) for s in samples])
    return crops, np.array([s.label for s in samples])


def test_training_is_deterministic(strip_crops):
    crops, labels = strip_crops
    runs = []
    for _ in range(2):
        net = build_network(ClassifierConfig(input_side=40), 4)
        _, hist = train_classifier(net, crops, labels, TrainConfig(iterations=3, seed=4))
        runs.append((hist, [p.data.copy() for p in net.params]))
    assert runs[0][0] == runs[1][0]
    for a, b in zip(runs[0][1], runs[1][1]):
        np.testing.assert_array_equal(a, b)


def test_learns_synthetic_strips(strip_crops):
    crops, labels = strip_crops
    net = build_network(ClassifierConfig(input_side=40), 0)
    train_classifier(net, crops, labels, TrainConfig(iterations=500))
    acc = np.mean((predict_batch(net, crops) >= 0.5) == labels)
    assert acc >= 0.9
