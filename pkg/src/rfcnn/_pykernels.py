"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature and
the same accumulation order, so the two backends agree bit-for-bit except for
``psroi_forward`` (numpy's pairwise summation vs. a sequential loop; the
difference is below 1e-12 for realistic bin sizes).
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(x, kh, kw, stride):
    """Unfold ``x[N,C,H,W]`` into ``[N*Ho*Wo, C*kh*kw]`` patch rows."""
    n, c, h, w = x.shape
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    win = win[:, :, :ho, :wo]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * kh * kw)


def col2im(cols, x_shape, kh, kw, stride):
    n, c, h, w = x_shape
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    cols = cols.reshape(n, ho, wo, c, kh, kw)
    dx = np.zeros(x_shape, dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx


def maxpool_forward(x, k, stride):
    """Return pooled values and the flat ``h*W+w`` argmax (first hit on ties)."""
    n, c, h, w = x.shape
    ho = (h - k) // stride + 1
    wo = (w - k) // stride + 1
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    flat = win.reshape(n, c, ho, wo, k * k)
    local = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, local[..., None], axis=-1)[..., 0]
    li, lj = np.divmod(local, k)
    rows = np.arange(ho)[:, None] * stride + li
    cols = np.arange(wo)[None, :] * stride + lj
    return np.ascontiguousarray(out), (rows * w + cols).astype(np.int64)


def maxpool_backward(dout, argmax, x_shape, overlapping=True):
    n, c, h, w = x_shape
    dx = np.zeros((n * c, h * w), dtype=np.float64)
    ho, wo = dout.shape[2], dout.shape[3]
    g = dout.reshape(n * c, ho * wo)
    a = argmax.reshape(n * c, ho * wo)
    rows = np.arange(n * c)
    if not overlapping:
        dx[rows[:, None], a] = g
        return dx.reshape(x_shape)
    # column-by-column keeps the (ho, wo) accumulation order of the compiled kernel
    for t in range(ho * wo):
        dx[rows, a[:, t]] += g[:, t]
    return dx.reshape(x_shape)


def _bin_edges(lo, extent, k, idx, limit):
    start = math.floor(lo + idx * extent / k)
    end = math.ceil(lo + (idx + 1) * extent / k)
    return min(max(start, 0), limit), min(max(end, 0), limit)


def psroi_bounds(rois, k, height, width):
    """Integer bin bounds ``[R,k,k,4]`` as (y_start, y_end, x_start, x_end)."""
    r = rois.shape[0]
    bounds = np.zeros((r, k, k, 4), dtype=np.int64)
    for i in range(r):
        x0, y0, x1, y1 = (float(v) for v in rois[i])
        rw = x1 - x0
        rh = y1 - y0
        for by in range(k):
            ys, ye = _bin_edges(y0, rh, k, by, height)
            for bx in range(k):
                xs, xe = _bin_edges(x0, rw, k, bx, width)
                bounds[i, by, bx] = (ys, ye, xs, xe)
    return bounds


def psroi_forward(maps, rois, k, n_cls):
    """Position-sensitive average pooling.

    ``maps[k*k*n_cls, H, W]``; ``rois[R,4]`` in feature-cell coordinates.
    Channel of (bin_y, bin_x, class) is ``(bin_y*k + bin_x)*n_cls + class``.
    """
    _, height, width = maps.shape
    bounds = psroi_bounds(rois, k, height, width)
    out = np.zeros((rois.shape[0], k, k, n_cls), dtype=np.float64)
    for i in range(rois.shape[0]):
        for by in range(k):
            for bx in range(k):
                ys, ye, xs, xe = bounds[i, by, bx]
                if ye <= ys or xe <= xs:
                    continue
                area = (ye - ys) * (xe - xs)
                base = (by * k + bx) * n_cls
                region = maps[base:base + n_cls, ys:ye, xs:xe]
                out[i, by, bx] = region.reshape(n_cls, -1).sum(axis=1) / area
    return out, bounds


def psroi_backward(dout, bounds, maps_shape, k, n_cls):
    dmaps = np.zeros(maps_shape, dtype=np.float64)
    for i in range(dout.shape[0]):
        for by in range(k):
            for bx in range(k):
                ys, ye, xs, xe = bounds[i, by, bx]
                if ye <= ys or xe <= xs:
                    continue
                area = (ye - ys) * (xe - xs)
                base = (by * k + bx) * n_cls
                for c in range(n_cls):
                    dmaps[base + c, ys:ye, xs:xe] += dout[i, by, bx, c] / area
    return dmaps


def nms(boxes, scores, thresh):
    """Greedy NMS; ties in score keep input order."""
    order = np.argsort(-scores, kind="stable")
    x0, y0, x1, y1 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    areas = (x1 - x0) * (y1 - y0)
    keep = []
    while order.size > 0:
        i = order[0]
        keep.append(i)
        rest = order[1:]
        iw = np.maximum(0.0, np.minimum(x1[i], x1[rest]) - np.maximum(x0[i], x0[rest]))
        ih = np.maximum(0.0, np.minimum(y1[i], y1[rest]) - np.maximum(y0[i], y0[rest]))
        inter = iw * ih
        union = areas[i] + areas[rest] - inter
        iou = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
        order = rest[iou <= thresh]
    return np.asarray(keep, dtype=np.int64)
