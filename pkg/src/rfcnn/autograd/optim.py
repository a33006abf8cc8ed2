import numpy as np

from rfcnn.errors import StateError


def sgd_step(params, lr, momentum, weight_decay):
    """One momentum-SGD update with L2 weight decay, then clear gradients.

    v <- momentum * v + grad + weight_decay * w;  w <- w - lr * v
    """
    for p in params:
        if p.grad is None:
            raise StateError(f"parameter {p.name or '?'} has no gradient")
    for p in params:
        p.velocity *= momentum
        p.velocity += p.grad + weight_decay * p.data
        p.data -= lr * p.velocity
        p.grad = None
    return params


def fill_missing_grads(params):
    """Give parameters the loss did not touch an explicit zero gradient."""
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)


def he_normal(rng, shape, fan_in):
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
