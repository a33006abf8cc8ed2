"""Position-sensitive RoI pooling and voting.

A score-map stack has ``k*k*n_classes`` channels. The channel serving bin
``(bin_y, bin_x)`` for class ``c`` is ``(bin_y*k + bin_x)*n_classes + c``;
this ordering is part of the model file format and must not change.

A RoI given in image pixels is projected onto the feature grid by dividing by
the stack's stride. Bin ``i`` along an axis spans cells
``floor(lo + i*extent/k)`` up to ``ceil(lo + (i+1)*extent/k)`` (clipped to the
map), so bins cover the whole RoI and neighbours may share one cell. A bin
left empty by clipping pools to 0 and passes no gradient.
"""

from dataclasses import dataclass

import numpy as np

from rfcnn import kernels
from rfcnn.autograd.tensor import make_result
from rfcnn.errors import DegenerateRoIError, DimensionError, StateError


@dataclass
class ScoreMapStack:
    maps: np.ndarray  # [k*k*n_classes, Hf, Wf]
    k: int = 3
    n_classes: int = 2
    stride: float = 1.0

    def __post_init__(self):
        self.maps = np.asarray(self.maps, dtype=np.float64)
        expected = self.k * self.k * self.n_classes
        if self.maps.ndim != 3 or self.maps.shape[0] != expected:
            raise DimensionError(
                f"score maps need {expected} channels (k={self.k}, classes={self.n_classes}), got shape {self.maps.shape}"
            )

    def channel(self, bin_y, bin_x, cls):
        return (bin_y * self.k + bin_x) * self.n_classes + cls


def project_rois(rois, stride):
    """Image-pixel RoIs ``[R,4]`` to feature-cell coordinates."""
    rois = np.ascontiguousarray(np.asarray(rois, dtype=np.float64).reshape(-1, 4) / stride)
    w = rois[:, 2] - rois[:, 0]
    h = rois[:, 3] - rois[:, 1]
    bad = ~((w > 0) & (h > 0))
    if bad.any():
        raise DegenerateRoIError(f"RoI {int(np.argmax(bad))} has zero projected area")
    return rois


def _roi_array(roi):
    return np.array([[roi.x0, roi.y0, roi.x1, roi.y1]], dtype=np.float64)


def psroi_pool(stack, roi):
    """Pooled bin responses ``[k, k, n_classes]`` for one RoI."""
    proj = project_rois(_roi_array(roi), stack.stride)
    out, _ = kernels.psroi_forward(np.ascontiguousarray(stack.maps), proj, stack.k, stack.n_classes)
    return out[0]


def psroi_backward(stack, roi, upstream):
    """Gradient of the pooled responses w.r.t. the score maps."""
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (stack.k, stack.k, stack.n_classes):
        raise StateError(f"upstream gradient {upstream.shape} does not match forward geometry k={stack.k}")
    proj = project_rois(_roi_array(roi), stack.stride)
    _, bounds = kernels.psroi_forward(np.ascontiguousarray(stack.maps), proj, stack.k, stack.n_classes)
    return kernels.psroi_backward(upstream[None], bounds, stack.maps.shape, stack.k, stack.n_classes)


def vote(pooled, reduce="mean"):
    """Class scores from pooled bins: mean (default) or sum over the k*k bins."""
    pooled = np.asarray(pooled, dtype=np.float64)
    s = pooled.sum(axis=(-3, -2))
    if reduce == "sum":
        return s
    if reduce != "mean":
        raise ValueError(f"reduce must be 'mean' or 'sum', got {reduce!r}")
    return s / (pooled.shape[-3] * pooled.shape[-2])


def psroi_pool_op(maps, rois, k, n_classes, stride):
    """Differentiable batched pooling: ``maps`` Tensor ``[k*k*C,H,W]`` -> ``[R,k,k,C]``."""
    if maps.ndim != 3 or maps.shape[0] != k * k * n_classes:
        raise DimensionError(f"score maps need {k * k * n_classes} channels, got {maps.shape}")
    proj = project_rois(rois, stride)
    out, bounds = kernels.psroi_forward(np.ascontiguousarray(maps.data), proj, k, n_classes)
    maps_shape = maps.shape

    def backward(g):
        return (kernels.psroi_backward(np.ascontiguousarray(g), bounds, maps_shape, k, n_classes),)

    return make_result(out, (maps,), backward)


def vote_op(pooled, reduce="mean"):
    """Differentiable vote over a ``[R,k,k,C]`` Tensor -> ``[R,C]``."""
    if reduce not in ("sum", "mean"):
        raise ValueError(f"reduce must be 'mean' or 'sum', got {reduce!r}")
    _, k1, k2, _ = pooled.shape
    divisor = 1.0 if reduce == "sum" else float(k1 * k2)

    def backward(g):
        return (np.broadcast_to((g / divisor)[:, None, None, :], pooled.shape).copy(),)

    return make_result(pooled.data.sum(axis=(1, 2)) / divisor, (pooled,), backward)


__all__ = [
    "ScoreMapStack",
    "project_rois",
    "psroi_backward",
    "psroi_pool",
    "psroi_pool_op",
    "vote",
    "vote_op",
]
