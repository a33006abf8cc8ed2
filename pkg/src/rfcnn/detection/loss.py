"""OHEM selection and the detector loss (classification + eye-box regression)."""

from dataclasses import dataclass

import numpy as np

from rfcnn.autograd import Tensor, add, smooth_l1_loss, softmax_cross_entropy, take_rows


@dataclass
class DetectorLoss:
    cls: Tensor
    reg: Tensor
    total: Tensor

    def values(self):
        return self.cls.item(), self.reg.item(), self.total.item()


def ohem_select(roi_losses, batch):
    """Indices of the ``batch`` largest losses, largest first; ties go to the lower index."""
    if batch < 1:
        raise ValueError("OHEM batch must be >= 1")
    losses = np.asarray(roi_losses, dtype=np.float64)
    return np.argsort(-losses, kind="stable")[:batch]


def detector_loss(cls_logits, cls_labels, reg_pred, reg_target, positives):
    """``total = cls + reg``.

    ``cls`` is the mean cross-entropy over all given RoIs; ``reg`` is the
    smooth-L1 of the positive RoIs' deltas averaged over positives (0 if none).
    """
    cls = softmax_cross_entropy(cls_logits, cls_labels)
    pos = np.flatnonzero(np.asarray(positives, dtype=bool))
    if pos.size:
        reg = smooth_l1_loss(take_rows(reg_pred, pos), np.asarray(reg_target)[pos], float(pos.size))
    else:
        reg = Tensor(0.0)
    return DetectorLoss(cls=cls, reg=reg, total=add(cls, reg))
