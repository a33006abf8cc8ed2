"""Crop, resize and normalise eye strips for the classifier."""

import numpy as np


def crop_resize(image, box, side):
    """Bilinearly resample ``box`` of a ``[3,H,W]`` image to ``[3,side,side]``."""
    _, h, w = image.shape
    x0, y0, x1, y1 = (float(v) for v in box)
    # pixel-centre sampling; source coordinates measured from pixel centres
    xs = x0 + (np.arange(side) + 0.5) * (x1 - x0) / side - 0.5
    ys = y0 + (np.arange(side) + 0.5) * (y1 - y0) / side - 0.5
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    xi = np.minimum(np.floor(xs).astype(np.int64), max(w - 2, 0))
    yi = np.minimum(np.floor(ys).astype(np.int64), max(h - 2, 0))
    fx = (xs - xi)[None, None, :]
    fy = (ys - yi)[None, :, None]
    xj = np.minimum(xi + 1, w - 1)
    yj = np.minimum(yi + 1, h - 1)
    top = image[:, yi][:, :, xi] * (1 - fx) + image[:, yi][:, :, xj] * fx
    bottom = image[:, yj][:, :, xi] * (1 - fx) + image[:, yj][:, :, xj] * fx
    return top * (1 - fy) + bottom * fy


def normalize(crop):
    """Zero mean, unit variance per channel."""
    mu = crop.mean(axis=(1, 2), keepdims=True)
    sd = crop.std(axis=(1, 2), keepdims=True)
    return (crop - mu) / np.maximum(sd, 1e-3)


def prepare_crop(image, box, side):
    return normalize(crop_resize(image, box, side))
