"""End-to-end orchestration behind the command-line verbs.

Each ``run_*`` function takes a resolved PipelineConfig plus directories,
writes its artifacts and returns a small summary dict.
"""

import logging
import os

import numpy as np

from rfcnn.boxes import iou
from rfcnn.classifier import build_network, predict_batch, train_classifier
from rfcnn.config import dump_config
from rfcnn.detection.model import segment_eye_region
from rfcnn.detection.train import train_detector
from rfcnn.errors import ConfigError, FormatError, NoDetectionError
from rfcnn.imageops import prepare_crop
from rfcnn.metrics import MetricReport, auc, roc_curve
from rfcnn.modelfile import load_model, model_version, save_model
from rfcnn.report import metric_csv, roc_points_csv, roc_svg, write_csv
from rfcnn.synth.dataset import MANIFEST, SPLIT_IDS, export_dataset, gen_dataset, gen_split, read_split
from rfcnn.synth.pnm import read_ppm

log = logging.getLogger("rfcnn")

DETECTOR_FILE = "detector.rfcn"
CLASSIFIER_FILE = "classifier.rfcn"
LOG_EVERY = 250


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _f(v):
    return f"{v:.6f}"


def log_config(cfg, outdir=None):
    text = dump_config(cfg)
    log.info("resolved config:\n%s", text.rstrip())
    if outdir is not None:
        _write_text(os.path.join(outdir, "config.resolved.txt"), text)


def split_dir(path, name):
    """``path`` itself if it holds a manifest, else its ``name`` subdirectory."""
    if os.path.exists(os.path.join(path, MANIFEST)):
        return path
    sub = os.path.join(path, name)
    if os.path.exists(os.path.join(sub, MANIFEST)):
        return sub
    raise FormatError(f"no {MANIFEST} in {path} or {sub}")


def crops_for(samples, boxes, side):
    return np.stack([prepare_crop(s.image, b.as_tuple()[:4], side) for s, b in zip(samples, boxes)])


def matched_boxes(detector, samples, match_iou):
    """Detector box where it overlaps the annotation by ``match_iou``, else the annotation."""
    boxes, n_matched = [], 0
    for s in samples:
        try:
            box = segment_eye_region(detector, s.image)
        except NoDetectionError:
            box = None
        if box is not None and iou(box, s.eye_box) >= match_iou:
            boxes.append(box)
            n_matched += 1
        else:
            boxes.append(s.eye_box)
    return boxes, n_matched


def _progress(stage, total):
    def on_step(step, value):
        if (step + 1) % LOG_EVERY == 0 or step + 1 == total:
            shown = value["total"] if isinstance(value, dict) else value
            log.info("%s step %d/%d loss %.4f", stage, step + 1, total, shown)

    return on_step


def run_gen_data(cfg, outdir):
    split = gen_dataset(cfg.n_train, cfg.n_test, cfg.strab_fraction_train, cfg.strab_fraction_test, cfg.seed)
    export_dataset(split, outdir)
    return split.class_counts()


def run_train(cfg, data_dir, outdir):
    os.makedirs(outdir, exist_ok=True)
    log_config(cfg, outdir)
    samples = read_split(split_dir(data_dir, "train"))
    if not samples:
        raise FormatError(f"training split in {data_dir} is empty")

    dtc = cfg.detector_train_for()
    detector, det_hist = train_detector(samples, cfg.detector, dtc, on_step=_progress("detector", dtc.iterations))
    save_model(os.path.join(outdir, DETECTOR_FILE), detector)
    keys = ("rpn_cls", "rpn_reg", "cls", "reg", "total")
    write_csv(os.path.join(outdir, "detector_loss.csv"), ("step",) + keys,
              [[str(i)] + [repr(float(h[k])) for k in keys] for i, h in enumerate(det_hist)])

    boxes, n_matched = matched_boxes(detector, samples, cfg.match_iou)
    log.info("classifier crops: %d of %d from detector boxes", n_matched, len(samples))
    crops = crops_for(samples, boxes, cfg.classifier.input_side)
    labels = np.array([s.label for s in samples])
    ctc = cfg.classifier_train_for()
    net = build_network(cfg.classifier, cfg.seed)
    net, clf_hist = train_classifier(net, crops, labels, ctc, on_step=_progress("classifier", ctc.iterations))
    save_model(os.path.join(outdir, CLASSIFIER_FILE), net)
    write_csv(os.path.join(outdir, "classifier_loss.csv"), ("step", "loss"),
              [[str(i), repr(float(v))] for i, v in enumerate(clf_hist)])
    return {"detector_matched": n_matched, "n_train": len(samples)}


def load_models(model_dir):
    det_path = os.path.join(model_dir, DETECTOR_FILE)
    clf_path = os.path.join(model_dir, CLASSIFIER_FILE)
    return load_model(det_path, "detector"), load_model(clf_path, "classifier"), model_version(det_path, clf_path)


def _write_metrics(outdir, scores, labels, threshold, stem=""):
    report = MetricReport.from_scores(scores, labels, threshold)
    _write_text(os.path.join(outdir, f"{stem}metrics.csv"), metric_csv(report))
    if report.auc is not None:
        curve = roc_curve(scores, labels)
        _write_text(os.path.join(outdir, f"{stem}roc_points.csv"), roc_points_csv(curve))
        _write_text(os.path.join(outdir, f"{stem}roc.svg"), roc_svg(curve, auc(curve)))
    return report


def run_eval(cfg, model_dir, data_dir, outdir):
    os.makedirs(outdir, exist_ok=True)
    log_config(cfg)
    samples = read_split(split_dir(data_dir, "test"))
    if not samples:
        raise FormatError(f"test split in {data_dir} is empty")
    detector, net, _ = load_models(model_dir)
    side = net.cfg.input_side

    rows, scores, ious, crops, where = [], np.zeros(len(samples)), np.zeros(len(samples)), [], []
    for i, s in enumerate(samples):
        try:
            box = segment_eye_region(detector, s.image)
        except NoDetectionError:
            rows.append([s.name, "", "", "", "", _f(0.0), "NO_DETECTION"])
            continue
        ious[i] = iou(box, s.eye_box)
        crops.append(prepare_crop(s.image, box.as_tuple()[:4], side))
        where.append(i)
        rows.append([s.name] + [_f(v) for v in box.as_tuple()[:4]] + [_f(ious[i]), "OK"])
    if crops:
        scores[where] = predict_batch(net, np.stack(crops))
    labels = np.array([s.label for s in samples])
    report = _write_metrics(outdir, scores, labels, cfg.threshold)
    n_missing = len(samples) - len(where)
    detected = set(where)

    write_csv(os.path.join(outdir, "detection.csv"), ("filename", "x0", "y0", "x1", "y1", "iou", "status"), rows)
    write_csv(os.path.join(outdir, "detection_summary.csv"), ("n_images", "n_no_detection", "mean_iou"),
              [[str(len(samples)), str(n_missing), _f(float(ious.mean()))]])
    write_csv(os.path.join(outdir, "scores.csv"), ("filename", "label", "prob_strabismus", "status"),
              [[s.name, str(s.label), _f(scores[i]), "OK" if i in detected else "NO_DETECTION"]
               for i, s in enumerate(samples)])
    log.info("mean IoU %.4f, %d without detection; %s", ious.mean(), n_missing, " ".join(report.csv_row()))
    return {"report": report, "mean_iou": float(ious.mean()), "n_no_detection": n_missing}


def list_images(input_dir):
    names = sorted(
        n for n in os.listdir(input_dir)
        if n != MANIFEST and not n.startswith(".") and os.path.isfile(os.path.join(input_dir, n))
    )
    if not names:
        raise FormatError(f"no images in {input_dir}")
    return names


def run_predict(cfg, model_dir, input_dir, outdir):
    os.makedirs(outdir, exist_ok=True)
    names = list_images(input_dir)
    detector, net, version = load_models(model_dir)
    rows = []
    for name in names:
        try:
            image = read_ppm(os.path.join(input_dir, name))
        except (FormatError, OSError) as exc:
            log.warning("%s: %s", name, exc)
            rows.append([name, "", "", "", "", "", "", version, "READ_ERROR"])
            continue
        try:
            box = segment_eye_region(detector, image)
        except NoDetectionError:
            rows.append([name, "", "", "", "", "", "", version, "NO_DETECTION"])
            continue
        p = float(predict_batch(net, prepare_crop(image, box.as_tuple()[:4], net.cfg.input_side)[None])[0])
        rows.append([name] + [_f(v) for v in box.as_tuple()[:4]]
                    + [_f(p), str(int(p >= cfg.threshold)), version, "OK"])
    header = ("filename", "x0", "y0", "x1", "y1", "prob_strabismus", "label", "model_version", "status")
    write_csv(os.path.join(outdir, "report.csv"), header, rows)
    return {"n_images": len(names), "status": [r[-1] for r in rows]}


def check_sizes(sizes):
    sizes = [int(n) for n in sizes]
    if not sizes or min(sizes) < 1:
        raise ConfigError("learning-curve sizes must be positive")
    if len(set(sizes)) != len(sizes):
        raise ConfigError("learning-curve sizes must not repeat")
    if sizes != sorted(sizes):
        raise ConfigError("learning-curve sizes must be ascending")
    return sizes


def run_learning_curve(cfg, sizes, outdir):
    """Classifier metrics versus training-set size on one fixed test split (annotated crops)."""
    sizes = check_sizes(sizes)
    os.makedirs(outdir, exist_ok=True)
    log_config(cfg, outdir)
    side = cfg.classifier.input_side
    test = gen_split(cfg.n_test, cfg.strab_fraction_test, cfg.seed, SPLIT_IDS["test"], "test")
    test_crops = crops_for(test, [s.eye_box for s in test], side)
    test_labels = np.array([s.label for s in test])
    ctc = cfg.classifier_train_for()
    rows = []
    for n in sizes:
        train = gen_split(n, cfg.strab_fraction_train, cfg.seed, SPLIT_IDS["train"], "train")
        crops = crops_for(train, [s.eye_box for s in train], side)
        net = build_network(cfg.classifier, cfg.seed)
        net, _ = train_classifier(net, crops, np.array([s.label for s in train]), ctc,
                                  on_step=_progress(f"classifier n={n}", ctc.iterations))
        save_model(os.path.join(outdir, f"classifier_n{n}.rfcn"), net)
        report = MetricReport.from_scores(predict_batch(net, test_crops), test_labels, cfg.threshold)
        log.info("n_train=%d %s", n, " ".join(report.csv_row()))
        rows.append([str(n)] + report.csv_row()[4:])
    write_csv(os.path.join(outdir, "learning_curve.csv"), ("n_train", "Se", "Sp", "Acc", "AUC"), rows)
    return rows
