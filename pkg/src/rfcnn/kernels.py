"""Backend selection for the hot kernels.

The compiled extension is used when it was built; set ``RFCNN_PURE_PYTHON=1``
to force the numpy fallback (used by the benchmark and the backend-agreement
tests).
"""

import os

if os.environ.get("RFCNN_PURE_PYTHON", "") not in ("", "0"):
    from rfcnn import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from rfcnn import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        from rfcnn import _pykernels as _impl

        BACKEND = "python"

im2col = _impl.im2col
col2im = _impl.col2im
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
psroi_forward = _impl.psroi_forward
psroi_backward = _impl.psroi_backward
nms = _impl.nms

__all__ = [
    "BACKEND",
    "im2col",
    "col2im",
    "maxpool_forward",
    "maxpool_backward",
    "psroi_forward",
    "psroi_backward",
    "nms",
]
