"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--steps N]

Part one times each kernel in isolation with both backends. Part two times a
few detector and classifier training steps in fresh interpreters, once per
backend (the backend is fixed at import time, see ``rfcnn.kernels``).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from rfcnn import _pykernels

try:
    from rfcnn import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def kernel_cases(rng):
    x = rng.standard_normal((32, 16, 31, 31))
    cols = _pykernels.im2col(x, 3, 3, 1)
    pool_in = rng.standard_normal((32, 16, 62, 62))
    _, arg = _pykernels.maxpool_forward(pool_in, 2, 2)
    maps = rng.standard_normal((18, 32, 40))
    xy = rng.uniform(0, 30, (64, 2))
    rois = np.hstack([xy, xy + rng.uniform(2, 12, (64, 2))])
    _, bounds = _pykernels.psroi_forward(maps, rois, 3, 2)
    dout = rng.standard_normal((64, 3, 3, 2))
    boxes = np.hstack([rng.uniform(0, 300, (600, 2)), np.zeros((600, 2))])
    boxes[:, 2:] = boxes[:, :2] + rng.uniform(8, 80, (600, 2))
    scores = rng.random(600)
    return [
        ("im2col 32x16x31x31 k3", lambda m: m.im2col(x, 3, 3, 1)),
        ("col2im 32x16x31x31 k3", lambda m: m.col2im(cols, x.shape, 3, 3, 1)),
        ("maxpool fwd 32x16x62x62", lambda m: m.maxpool_forward(pool_in, 2, 2)),
        ("maxpool bwd 32x16x62x62", lambda m: m.maxpool_backward(np.ones((32, 16, 31, 31)), arg, pool_in.shape, False)),
        ("psroi fwd 64 rois", lambda m: m.psroi_forward(maps, rois, 3, 2)),
        ("psroi bwd 64 rois", lambda m: m.psroi_backward(dout, bounds, maps.shape, 3, 2)),
        ("nms 600 boxes", lambda m: m.nms(boxes, scores, 0.3)),
    ]


STEP_SCRIPT = """
import time, numpy as np
from rfcnn import kernels
from rfcnn.synth import gen_split
from rfcnn.detection import DetectorConfig, DetectorTrainConfig, train_detector
from rfcnn.classifier import ClassifierConfig, TrainConfig, build_network, train_classifier
samples = gen_split(8, 0.25, 0, 0, "b")
t = time.perf_counter()
train_detector(samples, DetectorConfig(), DetectorTrainConfig(iterations={steps}))
det = (time.perf_counter() - t) / {steps}
crops = np.random.default_rng(0).standard_normal((64, 3, 64, 64))
t = time.perf_counter()
train_classifier(build_network(ClassifierConfig(), 0), crops, [0, 1] * 32, TrainConfig(iterations={steps}))
clf = (time.perf_counter() - t) / {steps}
print(kernels.BACKEND, det, clf)
"""


def step_times(pure, steps):
    env = dict(os.environ, RFCNN_PURE_PYTHON="1" if pure else "0", OPENBLAS_NUM_THREADS="1")
    out = subprocess.run([sys.executable, "-c", STEP_SCRIPT.format(steps=steps)], env=env,
                         capture_output=True, text=True, check=True).stdout.split()
    return out[0], float(out[1]), float(out[2])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats per kernel (best is kept)")
    ap.add_argument("--steps", type=int, default=20, help="training steps per backend in part two")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, call in kernel_cases(rng):
        t_py = min(timeit.repeat(lambda: call(_pykernels), number=1, repeat=args.repeat)) * 1e3
        t_c = min(timeit.repeat(lambda: call(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:28s} {t_py:10.3f} {t_c:10.3f} {t_py / t_c:7.1f}x")

    print()
    print(f"{'training step':28s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    _, det_py, clf_py = step_times(True, args.steps)
    _, det_c, clf_c = step_times(False, args.steps)
    print(f"{'detector (1 image)':28s} {det_py * 1e3:10.1f} {det_c * 1e3:10.1f} {det_py / det_c:7.1f}x")
    print(f"{'classifier (batch 32, 64px)':28s} {clf_py * 1e3:10.1f} {clf_c * 1e3:10.1f} {clf_py / clf_c:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
