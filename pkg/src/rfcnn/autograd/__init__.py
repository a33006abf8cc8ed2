"""Minimal float64 tensor library with reverse-mode autodiff."""

from rfcnn.autograd.gradcheck import grad_check
from rfcnn.autograd.ops import (
    add,
    conv2d,
    cross_entropy_rows,
    dropout,
    flatten,
    linear,
    maxpool2d,
    mean,
    mse_loss,
    relu,
    reshape,
    scale,
    smooth_l1_loss,
    softmax,
    softmax_cross_entropy,
    softmax_op,
    take_rows,
    total,
    transpose,
)
from rfcnn.autograd.optim import fill_missing_grads, he_normal, sgd_step
from rfcnn.autograd.tensor import Parameter, Tape, Tensor, is_grad_enabled, no_grad

__all__ = [
    "Parameter", "Tape", "Tensor", "add", "conv2d", "cross_entropy_rows", "dropout",
    "fill_missing_grads", "flatten", "grad_check", "he_normal", "is_grad_enabled",
    "linear", "maxpool2d", "mean", "mse_loss", "no_grad", "relu", "reshape", "scale",
    "sgd_step", "smooth_l1_loss", "softmax", "softmax_cross_entropy", "softmax_op", "take_rows",
    "total", "transpose",
]
