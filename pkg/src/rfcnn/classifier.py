"""Eye-strip strabismus classifier: five conv, three max-pool, three fc layers.

Layer order::

    conv1 relu pool1  conv2 relu pool2  conv3 relu  conv4 relu  conv5 relu pool3
    fc1 relu dropout  fc2 relu dropout  fc3

The output is two logits (index 0 normal, index 1 strabismus).
"""

from dataclasses import asdict, dataclass

import numpy as np

from rfcnn.autograd import (
    Parameter,
    Tensor,
    conv2d,
    dropout,
    flatten,
    he_normal,
    linear,
    maxpool2d,
    mse_loss,
    no_grad,
    relu,
    sgd_step,
    softmax,
    softmax_cross_entropy,
    softmax_op,
)
from rfcnn.errors import ConfigError, DimensionError, NumericError, TrainingError

POOL_AFTER = (0, 1, 4)  # conv indices followed by a pool


@dataclass(frozen=True)
class ClassifierConfig:
    input_side: int = 64
    conv_channels: tuple = (16, 32, 64, 64, 64)
    conv_kernels: tuple = (3, 3, 3, 3, 3)
    conv_strides: tuple = (1, 1, 1, 1, 1)
    pool_sizes: tuple = (2, 2, 2)
    pool_strides: tuple = (2, 2, 2)
    fc_widths: tuple = (256, 64, 2)
    dropout: float = 0.5
    loss: str = "cross_entropy"

    def __post_init__(self):
        if not (len(self.conv_channels) == len(self.conv_kernels) == len(self.conv_strides) == 5):
            raise ConfigError("the classifier has exactly five convolutional layers")
        if not (len(self.pool_sizes) == len(self.pool_strides) == 3):
            raise ConfigError("the classifier has exactly three pooling layers")
        if len(self.fc_widths) != 3 or self.fc_widths[-1] != 2:
            raise ConfigError("the classifier has three fc layers ending in 2 outputs")
        if self.loss not in ("cross_entropy", "mse"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if min(self.conv_channels + self.conv_kernels + self.conv_strides + self.pool_sizes
               + self.pool_strides + self.fc_widths + (self.input_side,)) < 1:
            raise ConfigError("all sizes must be positive")

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    batch: int = 32
    iterations: int = 5000
    momentum: float = 0.9
    weight_decay: float = 5e-4
    dropout: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0 or self.batch < 1 or self.iterations < 0 or self.momentum < 0 or self.weight_decay < 0:
            raise ConfigError("training hyper-parameters must be non-negative (batch >= 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")


@dataclass(frozen=True)
class StrabPrediction:
    prob_strabismus: float
    prob_normal: float
    label: int


def trace_shapes(cfg):
    """Spatial side after every conv/pool layer; raises ConfigError on underflow."""
    side = cfg.input_side
    sides = []
    pool = 0
    for i in range(5):
        k, s = cfg.conv_kernels[i], cfg.conv_strides[i]
        if side < k:
            raise ConfigError(f"input side {cfg.input_side} too small: conv{i + 1} needs {k}, has {side}")
        side = (side - k) // s + 1
        sides.append((f"conv{i + 1}", side))
        if i in POOL_AFTER:
            k, s = cfg.pool_sizes[pool], cfg.pool_strides[pool]
            pool += 1
            if side < k:
                raise ConfigError(f"input side {cfg.input_side} too small: pool{pool} needs {k}, has {side}")
            side = (side - k) // s + 1
            sides.append((f"pool{pool}", side))
    return sides


class StrabNet:
    def __init__(self, cfg, params):
        self.cfg = cfg
        self.params = params
        self.by_name = {p.name: p for p in params}

    def forward(self, x, training=False, rng=None, drop=None):
        cfg = self.cfg
        drop = cfg.dropout if drop is None else drop
        if not isinstance(x, Tensor):
            x = Tensor(x)
        if x.ndim != 4 or x.shape[1:] != (3, cfg.input_side, cfg.input_side):
            raise DimensionError(f"expected input [N,3,{cfg.input_side},{cfg.input_side}], got {x.shape}")
        p = self.by_name
        h = x
        pool = 0
        for i in range(5):
            h = relu(conv2d(h, p[f"conv{i + 1}.weight"], p[f"conv{i + 1}.bias"], stride=cfg.conv_strides[i]))
            if i in POOL_AFTER:
                h = maxpool2d(h, cfg.pool_sizes[pool], cfg.pool_strides[pool])
                pool += 1
        h = flatten(h)
        for i in range(3):
            h = linear(h, p[f"fc{i + 1}.weight"], p[f"fc{i + 1}.bias"])
            if i < 2:
                h = dropout(relu(h), drop, training, rng)
        return h

    def loss(self, logits, labels):
        if self.cfg.loss == "mse":
            onehot = np.eye(2)[np.asarray(labels, dtype=np.int64)]
            return mse_loss(softmax_op(logits), onehot)
        return softmax_cross_entropy(logits, labels)

    def probabilities(self, crops):
        with no_grad():
            return softmax(self.forward(np.asarray(crops, dtype=np.float64)).data)

    def state(self):
        return [p.data for p in self.params]


def build_network(cfg, seed=0):
    sides = trace_shapes(cfg)
    rng = np.random.default_rng([int(seed), 2])
    params = []
    c_in = 3
    for i in range(5):
        k = cfg.conv_kernels[i]
        c_out = cfg.conv_channels[i]
        fan_in = c_in * k * k
        params.append(Parameter(he_normal(rng, (c_out, c_in, k, k), fan_in), name=f"conv{i + 1}.weight"))
        params.append(Parameter(np.zeros(c_out), name=f"conv{i + 1}.bias"))
        c_in = c_out
    d = c_in * sides[-1][1] ** 2
    for i, width in enumerate(cfg.fc_widths):
        params.append(Parameter(he_normal(rng, (d, width), d), name=f"fc{i + 1}.weight"))
        params.append(Parameter(np.zeros(width), name=f"fc{i + 1}.bias"))
        d = width
    return StrabNet(cfg, params)


def train_classifier(net, crops, labels, tc, on_step=None):
    """Mini-batch SGD for exactly ``tc.iterations`` steps; returns (net, losses)."""
    crops = np.asarray(crops, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(crops) != len(labels):
        raise ValueError("crops and labels differ in length")
    if len(set(labels.tolist())) < 2:
        raise ValueError("training needs at least one example of each class")
    rng = np.random.default_rng([int(tc.seed), 3])
    order = rng.permutation(len(labels))
    cursor = 0
    history = []
    for step in range(tc.iterations):
        if cursor + tc.batch > len(order):
            order = rng.permutation(len(labels))
            cursor = 0
        idx = order[cursor:cursor + tc.batch]
        cursor += tc.batch
        try:
            logits = net.forward(crops[idx], training=True, rng=rng, drop=tc.dropout)
            loss = net.loss(logits, labels[idx])
            loss.backward()
        except NumericError as exc:
            raise TrainingError(f"classifier diverged at step {step}: {exc}", step=step, stage="classifier") from exc
        value = loss.item()
        sgd_step(net.params, tc.lr, tc.momentum, tc.weight_decay)
        history.append(value)
        if on_step is not None:
            on_step(step, value)
    return net, history


def predict(net, crop):
    crop = np.asarray(crop, dtype=np.float64)
    side = net.cfg.input_side
    if crop.shape != (3, side, side):
        raise DimensionError(f"crop must be [3,{side},{side}], got {crop.shape}")
    p = net.probabilities(crop[None])[0]
    return StrabPrediction(prob_strabismus=float(p[1]), prob_normal=float(p[0]), label=int(p[1] >= 0.5))


def predict_batch(net, crops, chunk=64):
    crops = np.asarray(crops, dtype=np.float64)
    out = [net.probabilities(crops[i:i + chunk])[:, 1] for i in range(0, len(crops), chunk)]
    return np.concatenate(out) if out else np.zeros(0)
