"""CSV and SVG report writers. Output is byte-stable for identical inputs."""

import csv
import io

from rfcnn.metrics import CSV_HEADER

SVG_W, SVG_H = 640, 480
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 30, 40, 60


def csv_text(header, rows):
    """RFC-4180 CSV (CRLF line ends, minimal quoting)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows))


def metric_csv(report):
    return csv_text(CSV_HEADER, [report.csv_row()])


def roc_points_csv(curve):
    rows = [[repr(float(f)), repr(float(t)), repr(float(th))] for f, t, th in zip(curve.fpr, curve.tpr, curve.thresholds)]
    return csv_text(("FPR", "TPR", "threshold"), rows)


def _xy(fpr, tpr):
    pw = SVG_W - _LEFT - _RIGHT
    ph = SVG_H - _TOP - _BOTTOM
    return _LEFT + fpr * pw, _TOP + (1.0 - tpr) * ph


def roc_svg(curve, area=None, title="ROC"):
    """SVG 1.1 document with the ROC polyline, chance diagonal, axes and ticks."""
    x0, y0 = _xy(0.0, 0.0)
    x1, y1 = _xy(1.0, 1.0)
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_W}" height="{SVG_H}" '
        f'viewBox="0 0 {SVG_W} {SVG_H}">',
        f'<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="white"/>',
        f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y0:.2f}" stroke="black" stroke-width="1"/>',
        f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x0:.2f}" y2="{y1:.2f}" stroke="black" stroke-width="1"/>',
        f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" stroke="gray" stroke-dasharray="4,4"/>',
    ]
    for i in range(6):
        v = i / 5
        tx, _ = _xy(v, 0.0)
        _, ty = _xy(0.0, v)
        out.append(f'<line x1="{tx:.2f}" y1="{y0:.2f}" x2="{tx:.2f}" y2="{y0 + 5:.2f}" stroke="black"/>')
        out.append(f'<text x="{tx:.2f}" y="{y0 + 20:.2f}" font-size="12" text-anchor="middle">{v:.1f}</text>')
        out.append(f'<line x1="{x0 - 5:.2f}" y1="{ty:.2f}" x2="{x0:.2f}" y2="{ty:.2f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8:.2f}" y="{ty + 4:.2f}" font-size="12" text-anchor="end">{v:.1f}</text>')
    points = " ".join("{:.3f},{:.3f}".format(*_xy(float(f), float(t))) for f, t in zip(curve.fpr, curve.tpr))
    out.append(f'<polyline points="{points}" fill="none" stroke="#1f5fbf" stroke-width="2"/>')
    label = title if area is None else f"{title} (AUC = {area:.4f})"
    out.append(f'<text x="{SVG_W / 2:.2f}" y="24" font-size="15" text-anchor="middle">{label}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{SVG_H - 15}" font-size="13" text-anchor="middle">'
               'False positive rate (1 - specificity)</text>')
    cy = (y0 + y1) / 2
    out.append(f'<text x="18" y="{cy:.2f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 18 {cy:.2f})">True positive rate (sensitivity)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
