# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Signatures and accumulation order mirror _pykernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil

cnp.import_array()


def im2col(const double[:, :, :, ::1] x, Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = (h - kh) // stride + 1
    cdef Py_ssize_t wo = (w - kw) // stride + 1
    cdef Py_ssize_t ncol = c * kh * kw
    out_arr = np.empty((n * ho * wo, ncol), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t b, oy, ox, ch, i, j, row, col, y0, x0
    with nogil:
        for b in range(n):
            for oy in range(ho):
                y0 = oy * stride
                for ox in range(wo):
                    x0 = ox * stride
                    row = (b * ho + oy) * wo + ox
                    col = 0
                    for ch in range(c):
                        for i in range(kh):
                            for j in range(kw):
                                out[row, col] = x[b, ch, y0 + i, x0 + j]
                                col += 1
    return out_arr


def col2im(cols_in, tuple x_shape, Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride):
    cdef Py_ssize_t n = x_shape[0], c = x_shape[1], h = x_shape[2], w = x_shape[3]
    cdef Py_ssize_t ho = (h - kh) // stride + 1
    cdef Py_ssize_t wo = (w - kw) // stride + 1
    cdef const double[:, ::1] cols = np.ascontiguousarray(cols_in, dtype=np.float64).reshape(n * ho * wo, c * kh * kw)
    dx_arr = np.zeros((n, c, h, w), dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t b, oy, ox, ch, i, j, row
    # (i, j) outermost so every dx cell sums its contributions in kernel order
    with nogil:
        for i in range(kh):
            for j in range(kw):
                for b in range(n):
                    for oy in range(ho):
                        for ox in range(wo):
                            row = (b * ho + oy) * wo + ox
                            for ch in range(c):
                                dx[b, ch, oy * stride + i, ox * stride + j] += cols[row, (ch * kh + i) * kw + j]
    return dx_arr


def maxpool_forward(const double[:, :, :, ::1] x, Py_ssize_t k, Py_ssize_t stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = (h - k) // stride + 1
    cdef Py_ssize_t wo = (w - k) // stride + 1
    out_arr = np.empty((n, c, ho, wo), dtype=np.float64)
    arg_arr = np.empty((n, c, ho, wo), dtype=np.int64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, :, ::1] arg = arg_arr
    cdef Py_ssize_t b, ch, oy, ox, i, j, best_at
    cdef double best, v
    with nogil:
        for b in range(n):
            for ch in range(c):
                for oy in range(ho):
                    for ox in range(wo):
                        best = x[b, ch, oy * stride, ox * stride]
                        best_at = oy * stride * w + ox * stride
                        for i in range(k):
                            for j in range(k):
                                v = x[b, ch, oy * stride + i, ox * stride + j]
                                if v > best:
                                    best = v
                                    best_at = (oy * stride + i) * w + ox * stride + j
                        out[b, ch, oy, ox] = best
                        arg[b, ch, oy, ox] = best_at
    return out_arr, arg_arr


def maxpool_backward(dout_in, argmax_in, tuple x_shape, overlapping=True):
    cdef Py_ssize_t n = x_shape[0], c = x_shape[1], h = x_shape[2], w = x_shape[3]
    cdef const double[:, :, :, ::1] dout = np.ascontiguousarray(dout_in, dtype=np.float64)
    cdef const cnp.int64_t[:, :, :, ::1] arg = np.ascontiguousarray(argmax_in, dtype=np.int64)
    cdef Py_ssize_t ho = dout.shape[2], wo = dout.shape[3]
    dx_arr = np.zeros((n, c, h * w), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t b, ch, oy, ox
    with nogil:
        for b in range(n):
            for ch in range(c):
                for oy in range(ho):
                    for ox in range(wo):
                        dx[b, ch, arg[b, ch, oy, ox]] += dout[b, ch, oy, ox]
    return dx_arr.reshape(n, c, h, w)


cdef inline Py_ssize_t _clip(Py_ssize_t v, Py_ssize_t limit) nogil:
    if v < 0:
        return 0
    if v > limit:
        return limit
    return v


def psroi_bounds(const double[:, ::1] rois, Py_ssize_t k, Py_ssize_t height, Py_ssize_t width):
    cdef Py_ssize_t r = rois.shape[0]
    bounds_arr = np.zeros((r, k, k, 4), dtype=np.int64)
    cdef cnp.int64_t[:, :, :, ::1] bounds = bounds_arr
    cdef Py_ssize_t i, by, bx
    cdef double x0, y0, rw, rh
    with nogil:
        for i in range(r):
            x0 = rois[i, 0]
            y0 = rois[i, 1]
            rw = rois[i, 2] - x0
            rh = rois[i, 3] - y0
            for by in range(k):
                for bx in range(k):
                    bounds[i, by, bx, 0] = _clip(<Py_ssize_t>floor(y0 + by * rh / k), height)
                    bounds[i, by, bx, 1] = _clip(<Py_ssize_t>ceil(y0 + (by + 1) * rh / k), height)
                    bounds[i, by, bx, 2] = _clip(<Py_ssize_t>floor(x0 + bx * rw / k), width)
                    bounds[i, by, bx, 3] = _clip(<Py_ssize_t>ceil(x0 + (bx + 1) * rw / k), width)
    return bounds_arr


def psroi_forward(maps_in, rois_in, Py_ssize_t k, Py_ssize_t n_cls):
    cdef const double[:, :, ::1] maps = np.ascontiguousarray(maps_in, dtype=np.float64)
    cdef const double[:, ::1] rois = np.ascontiguousarray(rois_in, dtype=np.float64)
    bounds_arr = psroi_bounds(rois, k, maps.shape[1], maps.shape[2])
    cdef const cnp.int64_t[:, :, :, ::1] bounds = bounds_arr
    cdef Py_ssize_t r = rois.shape[0]
    out_arr = np.zeros((r, k, k, n_cls), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, by, bx, cl, y, x, ys, ye, xs, xe, ch
    cdef double acc, area
    with nogil:
        for i in range(r):
            for by in range(k):
                for bx in range(k):
                    ys = bounds[i, by, bx, 0]
                    ye = bounds[i, by, bx, 1]
                    xs = bounds[i, by, bx, 2]
                    xe = bounds[i, by, bx, 3]
                    if ye <= ys or xe <= xs:
                        continue
                    area = <double>((ye - ys) * (xe - xs))
                    for cl in range(n_cls):
                        ch = (by * k + bx) * n_cls + cl
                        acc = 0.0
                        for y in range(ys, ye):
                            for x in range(xs, xe):
                                acc += maps[ch, y, x]
                        out[i, by, bx, cl] = acc / area
    return out_arr, bounds_arr


def psroi_backward(dout_in, bounds_in, tuple maps_shape, Py_ssize_t k, Py_ssize_t n_cls):
    cdef const double[:, :, :, ::1] dout = np.ascontiguousarray(dout_in, dtype=np.float64)
    cdef const cnp.int64_t[:, :, :, ::1] bounds = np.ascontiguousarray(bounds_in, dtype=np.int64)
    dmaps_arr = np.zeros(maps_shape, dtype=np.float64)
    cdef double[:, :, ::1] dmaps = dmaps_arr
    cdef Py_ssize_t i, by, bx, cl, y, x, ys, ye, xs, xe, ch
    cdef double g, area
    with nogil:
        for i in range(dout.shape[0]):
            for by in range(k):
                for bx in range(k):
                    ys = bounds[i, by, bx, 0]
                    ye = bounds[i, by, bx, 1]
                    xs = bounds[i, by, bx, 2]
                    xe = bounds[i, by, bx, 3]
                    if ye <= ys or xe <= xs:
                        continue
                    area = <double>((ye - ys) * (xe - xs))
                    for cl in range(n_cls):
                        ch = (by * k + bx) * n_cls + cl
                        g = dout[i, by, bx, cl] / area
                        for y in range(ys, ye):
                            for x in range(xs, xe):
                                dmaps[ch, y, x] += g
    return dmaps_arr


def nms(boxes_in, scores_in, double thresh):
    cdef const double[:, ::1] boxes = np.ascontiguousarray(boxes_in, dtype=np.float64)
    order_arr = np.argsort(-np.asarray(scores_in, dtype=np.float64), kind="stable")
    cdef const cnp.int64_t[::1] order = order_arr.astype(np.int64)
    cdef Py_ssize_t m = order.shape[0]
    suppressed_arr = np.zeros(m, dtype=np.uint8)
    cdef unsigned char[::1] suppressed = suppressed_arr
    keep_arr = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] keep = keep_arr
    cdef Py_ssize_t a, b, i, j, nkeep = 0
    cdef double iw, ih, inter, union, area_i, area_j, iou
    with nogil:
        for a in range(m):
            if suppressed[a]:
                continue
            i = order[a]
            keep[nkeep] = i
            nkeep += 1
            area_i = (boxes[i, 2] - boxes[i, 0]) * (boxes[i, 3] - boxes[i, 1])
            for b in range(a + 1, m):
                if suppressed[b]:
                    continue
                j = order[b]
                iw = min(boxes[i, 2], boxes[j, 2]) - max(boxes[i, 0], boxes[j, 0])
                ih = min(boxes[i, 3], boxes[j, 3]) - max(boxes[i, 1], boxes[j, 1])
                if iw < 0.0:
                    iw = 0.0
                if ih < 0.0:
                    ih = 0.0
                inter = iw * ih
                area_j = (boxes[j, 2] - boxes[j, 0]) * (boxes[j, 3] - boxes[j, 1])
                union = area_i + area_j - inter
                iou = inter / union if union > 0.0 else 0.0
                if iou > thresh:
                    suppressed[b] = 1
    return keep_arr[:nkeep].copy()
