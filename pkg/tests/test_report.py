import re

from rfcnn.metrics import ConfusionCounts, MetricReport, roc_curve
from rfcnn.report import csv_text, metric_csv, roc_points_csv, roc_svg


def test_metric_csv_shape():
    text = metric_csv(MetricReport.from_counts(ConfusionCounts(1, 2, 0, 1), 0.75))
    assert text == "TP,TN,FP,FN,Se,Sp,Acc,AUC\r\n1,2,0,1,0.5000,1.0000,0.7500,0.7500\r\n"


def test_csv_quoting():
    assert csv_text(["a"], [['x,"y"']]) == 'a\r\n"x,""y"""\r\n'


def test_roc_svg_polyline_endpoints():
    curve = roc_curve([0.9, 0.4, 0.3, 0.1], [1, 0, 1, 0])
    svg = roc_svg(curve, 0.75)
    assert svg.startswith("<?xml") and 'version="1.1"' in svg and 'viewBox="0 0 640 480"' in svg
    pts = re.search(r'<polyline points="([^"]+)"', svg).group(1).split()
    assert pts[0] == "70.000,420.000" and pts[-1] == "610.000,40.000"
    assert "AUC = 0.7500" in svg
    assert roc_svg(curve, 0.75) == svg


def test_roc_points_csv():
    lines = roc_points_csv(roc_curve([0.9, 0.1], [1, 0])).splitlines()
    assert lines[0] == "FPR,TPR,threshold" and lines[1] == "0.0,0.0,inf" and lines[-1] == "1.0,1.0,0.1"
