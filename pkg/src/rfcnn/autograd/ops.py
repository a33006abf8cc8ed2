"""Differentiable layer ops used by the detector and the classifier."""

import numpy as np

from rfcnn import kernels
from rfcnn.autograd.tensor import Tensor, make_result
from rfcnn.errors import DimensionError


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def conv2d(x, weight, bias, stride=1, padding=0):
    """Valid (optionally zero-padded) convolution.

    ``x`` is ``[C,H,W]`` or ``[N,C,H,W]``; ``weight`` is ``[C_out,C_in,Kh,Kw]``.
    Output side is ``(H + 2*padding - Kh) // stride + 1``.
    """
    if stride < 1:
        raise DimensionError(f"stride must be >= 1, got {stride}")
    single = x.ndim == 3
    if x.ndim not in (3, 4) or weight.ndim != 4:
        raise DimensionError(f"conv2d expects [C,H,W] or [N,C,H,W] input and 4-d kernels, got {x.shape} and {weight.shape}")
    xd = x.data[None] if single else x.data
    c_out, c_in, kh, kw = weight.shape
    if xd.shape[1] != c_in:
        raise DimensionError(f"input has {xd.shape[1]} channels, kernels expect {c_in}")
    if bias.shape != (c_out,):
        raise DimensionError(f"bias shape {bias.shape} does not match {c_out} output channels")
    if padding:
        xd = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    n, _, h, w = xd.shape
    if kh > h or kw > w:
        raise DimensionError(f"kernel {kh}x{kw} larger than input {h}x{w}")
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    cols = kernels.im2col(np.ascontiguousarray(xd), kh, kw, stride)
    wm = weight.data.reshape(c_out, -1)
    out = (cols @ wm.T + bias.data).reshape(n, ho, wo, c_out).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)
    padded_shape = xd.shape

    def backward(g):
        g4 = g[None] if single else g
        gm = np.ascontiguousarray(g4.transpose(0, 2, 3, 1)).reshape(-1, c_out)
        dw = (gm.T @ cols).reshape(weight.shape) if weight.requires_grad else None
        db = gm.sum(axis=0) if bias.requires_grad else None
        dx = None
        if x.requires_grad:
            dx = kernels.col2im(gm @ wm, padded_shape, kh, kw, stride)
            if padding:
                dx = dx[:, :, padding:-padding, padding:-padding]
            dx = dx[0] if single else dx
        return dx, dw, db

    return make_result(out[0] if single else out, (x, weight, bias), backward)


def maxpool2d(x, k, stride=None):
    """Max pooling; gradient goes to the first maximum in row-major order."""
    stride = k if stride is None else stride
    single = x.ndim == 3
    xd = x.data[None] if single else x.data
    if xd.ndim != 4:
        raise DimensionError(f"maxpool2d expects [C,H,W] or [N,C,H,W], got {x.shape}")
    if k > xd.shape[2] or k > xd.shape[3]:
        raise DimensionError(f"pool window {k} larger than input {xd.shape[2]}x{xd.shape[3]}")
    out, argmax = kernels.maxpool_forward(np.ascontiguousarray(xd), k, stride)
    in_shape = xd.shape

    def backward(g):
        g4 = g[None] if single else g
        dx = kernels.maxpool_backward(np.ascontiguousarray(g4), argmax, in_shape, stride < k)
        return (dx[0] if single else dx,)

    return make_result(out[0] if single else out, (x,), backward)


def relu(x):
    mask = x.data > 0

    def backward(g):
        return (g * mask,)

    return make_result(np.where(mask, x.data, 0.0), (x,), backward)


def linear(x, weight, bias):
    """``x[N,D] @ weight[D,M] + bias[M]``."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise DimensionError(f"linear: cannot apply weight {weight.shape} to input {x.shape}")
    if bias.shape != (weight.shape[1],):
        raise DimensionError(f"linear: bias {bias.shape} does not match weight {weight.shape}")

    def backward(g):
        dx = g @ weight.data.T if x.requires_grad else None
        dw = x.data.T @ g if weight.requires_grad else None
        db = g.sum(axis=0) if bias.requires_grad else None
        return dx, dw, db

    return make_result(x.data @ weight.data + bias.data, (x, weight, bias), backward)


def softmax(logits):
    """Row-wise softmax of a numpy array, max-subtracted."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_rows(logits, labels):
    """Per-row ``-log softmax[label]`` of a numpy ``[N,C]`` array."""
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    return logsum - z[np.arange(len(labels)), labels]


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of ``logits[N,C]`` against integer ``labels[N]``."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(f"logits {logits.shape} and labels {labels.shape} disagree")
    n, c = logits.shape
    if n == 0:
        raise ValueError("softmax_cross_entropy needs at least one row")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must lie in [0, {c})")
    loss = cross_entropy_rows(logits.data, labels).mean()

    def backward(g):
        p = softmax(logits.data)
        p[np.arange(n), labels] -= 1.0
        return (p * (g / n),)

    return make_result(loss, (logits,), backward)


def mse_loss(pred, target):
    """``(1/N) * sum_i ||pred_i - target_i||^2``."""
    target = _as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss shapes differ: {pred.shape} vs {target.shape}")
    n = pred.shape[0] if pred.ndim else 1
    diff = pred.data - target.data

    def backward(g):
        d = 2.0 * g * diff / n
        return d, -d

    return make_result((diff * diff).sum() / n, (pred, target), backward)


def dropout(x, p, training, rng):
    """Inverted dropout: drop with probability ``p`` and rescale survivors."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    mask = (rng.random(x.shape) >= p) / (1.0 - p)

    def backward(g):
        return (g * mask,)

    return make_result(x.data * mask, (x,), backward)


def smooth_l1_loss(pred, target, normalizer):
    """Sum of elementwise smooth-L1 over ``pred - target``, divided by ``normalizer``."""
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"smooth_l1_loss shapes differ: {pred.shape} vs {target.shape}")
    d = pred.data - target
    ad = np.abs(d)
    small = ad < 1.0
    value = np.where(small, 0.5 * d * d, ad - 0.5).sum() / normalizer

    def backward(g):
        return (g * np.where(small, d, np.sign(d)) / normalizer,)

    return make_result(value, (pred,), backward)


def reshape(x, shape):
    def backward(g):
        return (g.reshape(x.shape),)

    return make_result(x.data.reshape(shape), (x,), backward)


def flatten(x):
    """``[N, ...] -> [N, prod(...)]``."""
    return reshape(x, (x.shape[0], -1))


def transpose(x, axes):
    inverse = np.argsort(axes)

    def backward(g):
        return (g.transpose(inverse),)

    return make_result(np.ascontiguousarray(x.data.transpose(axes)), (x,), backward)


def take_rows(x, index):
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        dx = np.zeros_like(x.data)
        np.add.at(dx, index, g)
        return (dx,)

    return make_result(x.data[index], (x,), backward)


def add(a, b):
    b = _as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"add shapes differ: {a.shape} vs {b.shape}")

    def backward(g):
        return g, g

    return make_result(a.data + b.data, (a, b), backward)


def scale(x, factor):
    factor = float(factor)

    def backward(g):
        return (g * factor,)

    return make_result(x.data * factor, (x,), backward)


def mean(x, axis=None):
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])

    def backward(g):
        g = np.asarray(g)
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape) / count,)

    return make_result(x.data.mean(axis=axis), (x,), backward)


def total(x):
    def backward(g):
        return (np.broadcast_to(np.asarray(g), x.shape).copy(),)

    return make_result(x.data.sum(), (x,), backward)


def softmax_op(logits):
    """Differentiable row-wise softmax of ``[N,C]`` logits."""
    p = softmax(logits.data)

    def backward(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return make_result(p, (logits,), backward)
