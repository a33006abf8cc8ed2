import csv
import os
import shutil
from fractions import Fraction

import numpy as np
import pytest

from rfcnn.cli import main
from rfcnn.classifier import ClassifierConfig, build_network
from rfcnn.detection import DetectorConfig, build_detector
from rfcnn.modelfile import load_model, save_model
from rfcnn.synth import render_background, write_ppm

SMALL = "n_train=12\nn_test=10\ndet_iterations=6\nclf_iterations=3\nclf_input_side=40\ncurve_sizes=8,12\n"


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "small.cfg"
    cfg.write_text(SMALL, encoding="utf-8")
    assert main(["gen-data", "--config", str(cfg), "--out", str(root / "data"), "--quiet"]) == 0
    assert main(["train", "--config", str(cfg), "--data", str(root / "data"), "--out", str(root / "models"), "--quiet"]) == 0
    return root, str(cfg)


def test_gen_data_counts_and_repeatability(work, tmp_path, capsys):
    root, cfg = work
    assert main(["gen-data", "--config", cfg, "--out", str(tmp_path / "again")]) == 0
    assert "train: 12 images" in capsys.readouterr().out
    for split in ("train", "test"):
        names = sorted(os.listdir(root / "data" / split))
        assert names == sorted(os.listdir(tmp_path / "again" / split))
        for n in names:
            assert (root / "data" / split / n).read_bytes() == (tmp_path / "again" / split / n).read_bytes()


def test_unwritable_output_is_exit_2(work, tmp_path):
    _, cfg = work
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["gen-data", "--config", cfg, "--out", str(blocker / "sub")]) == 2


def test_usage_errors(work, tmp_path):
    _, cfg = work
    bad = tmp_path / "bad.cfg"
    bad.write_text("nope=1\n")
    assert main(["gen-data", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert main(["gen-data", "--config", cfg]) == 2
    with pytest.raises(SystemExit) as info:
        main(["fly"])
    assert info.value.code == 2


def test_train_writes_models_and_loss_logs(work):
    root, _ = work
    names = set(os.listdir(root / "models"))
    assert {"detector.rfcn", "classifier.rfcn", "detector_loss.csv", "classifier_loss.csv", "config.resolved.txt"} <= names
    assert len(rows(root / "models" / "detector_loss.csv")) == 7
    assert rows(root / "models" / "classifier_loss.csv")[0] == ["step", "loss"]


def test_zero_iterations_give_initial_models(work, tmp_path):
    root, _ = work
    cfg = tmp_path / "zero.cfg"
    cfg.write_text(SMALL.replace("det_iterations=6", "det_iterations=0").replace("clf_iterations=3", "clf_iterations=0"))
    assert main(["train", "--config", str(cfg), "--seed", "4", "--data", str(root / "data"), "--out", str(tmp_path / "m"), "--quiet"]) == 0
    det = load_model(tmp_path / "m" / "detector.rfcn")
    clf = load_model(tmp_path / "m" / "classifier.rfcn")
    for a, b in zip(det.params, build_detector(DetectorConfig(), 4).params):
        np.testing.assert_array_equal(a.data, b.data)
    for a, b in zip(clf.params, build_network(ClassifierConfig(input_side=40), 4).params):
        np.testing.assert_array_equal(a.data, b.data)


def test_same_seed_gives_identical_models(work, tmp_path):
    root, cfg = work
    assert main(["train", "--config", cfg, "--data", str(root / "data"), "--out", str(tmp_path / "m"), "--quiet"]) == 0
    for name in ("detector.rfcn", "classifier.rfcn", "detector_loss.csv", "classifier_loss.csv"):
        assert (tmp_path / "m" / name).read_bytes() == (root / "models" / name).read_bytes()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_exit_3(work, tmp_path):
    root, _ = work
    cfg = tmp_path / "hot.cfg"
    cfg.write_text(SMALL.replace("det_iterations=6", "det_iterations=30\ndet_lr=1e12"))
    assert main(["train", "--config", str(cfg), "--data", str(root / "data"), "--out", str(tmp_path / "m"), "--quiet"]) == 3


def test_eval_outputs(work, tmp_path):
    root, cfg = work
    out = tmp_path / "ev"
    assert main(["eval", "--config", cfg, "--models", str(root / "models"), "--data", str(root / "data"), "--out", str(out), "--quiet"]) == 0
    table = rows(out / "metrics.csv")
    assert table[0] == ["TP", "TN", "FP", "FN", "Se", "Sp", "Acc", "AUC"]
    tp, tn, fp, fn = (int(v) for v in table[1][:4])
    assert tp + tn + fp + fn == 10
    for got, num, den in ((table[1][4], tp, tp + fn), (table[1][5], tn, tn + fp), (table[1][6], tp + tn, 10)):
        assert got == ("NA" if den == 0 else f"{float(Fraction(num, den)):.4f}")
    svg = (out / "roc.svg").read_text()
    assert "<polyline" in svg
    points = rows(out / "roc_points.csv")
    assert points[1][:2] == ["0.0", "0.0"] and points[-1][:2] == ["1.0", "1.0"]
    assert len(rows(out / "detection.csv")) == 11
    assert rows(out / "detection_summary.csv")[1][0] == "10"


def test_eval_empty_split_is_exit_2(work, tmp_path):
    root, cfg = work
    (tmp_path / "empty").mkdir()
    (tmp_path / "empty" / "manifest.tsv").write_text("")
    assert main(["eval", "--config", cfg, "--models", str(root / "models"), "--data", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) == 2


@pytest.fixture
def blind_models(work, tmp_path):
    """Trained classifier plus a detector biased to see only background."""
    root, _ = work
    d = tmp_path / "blind"
    d.mkdir()
    shutil.copy(root / "models" / "classifier.rfcn", d / "classifier.rfcn")
    det = build_detector(DetectorConfig(), 0)
    det.by_name["ps_cls.bias"].data[0::2] = 50.0
    save_model(d / "detector.rfcn", det)
    return d


def test_predict_rows_in_order(work, tmp_path):
    root, cfg = work
    src = tmp_path / "in"
    src.mkdir()
    for n in ("test_00002.ppm", "test_00000.ppm", "test_00001.ppm"):
        shutil.copy(root / "data" / "test" / n, src / n)
    args = ["predict", "--config", cfg, "--models", str(root / "models"), "--input", str(src), "--quiet"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    table = rows(tmp_path / "a" / "report.csv")
    assert [r[0] for r in table[1:]] == ["test_00000.ppm", "test_00001.ppm", "test_00002.ppm"]
    assert table[0][-1] == "status" and table[1][-2].startswith("0.1.0+")
    assert (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()


def test_predict_flags_no_detection_and_read_errors(blind_models, tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    write_ppm(src / "blank.ppm", render_background(1, 120, 96))
    (src / "broken.ppm").write_bytes(b"P6\n4 4\n255\n\x00")
    assert main(["predict", "--models", str(blind_models), "--input", str(src), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    status = {r[0]: r[-1] for r in rows(tmp_path / "o" / "report.csv")[1:]}
    assert status == {"blank.ppm": "NO_DETECTION", "broken.ppm": "READ_ERROR"}


def test_eval_scores_missing_detections_as_zero(work, blind_models, tmp_path):
    root, cfg = work
    assert main(["eval", "--config", cfg, "--models", str(blind_models), "--data", str(root / "data"), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    scores = rows(tmp_path / "o" / "scores.csv")[1:]
    assert all(r[2] == "0.000000" and r[3] == "NO_DETECTION" for r in scores)
    assert rows(tmp_path / "o" / "detection_summary.csv")[1] == ["10", "10", "0.000000"]


def test_predict_empty_dir_is_exit_2(work, tmp_path):
    root, _ = work
    (tmp_path / "none").mkdir()
    assert main(["predict", "--models", str(root / "models"), "--input", str(tmp_path / "none"), "--out", str(tmp_path / "o")]) == 2


def test_learning_curve(work, tmp_path, capsys):
    _, cfg = work
    assert main(["learning-curve", "--config", cfg, "--out", str(tmp_path / "lc"), "--quiet"]) == 0
    table = rows(tmp_path / "lc" / "learning_curve.csv")
    assert table[0] == ["n_train", "Se", "Sp", "Acc", "AUC"]
    assert [r[0] for r in table[1:]] == ["8", "12"]
    assert main(["learning-curve", "--config", cfg, "--sizes", "8,8", "--out", str(tmp_path / "x")]) == 2
    assert main(["learning-curve", "--config", cfg, "--sizes", "12,8", "--out", str(tmp_path / "x")]) == 2
