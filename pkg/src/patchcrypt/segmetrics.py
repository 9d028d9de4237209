"""Pixel confusion matrix and the aAcc / mAcc / mIoU metrics.

Counts are 64-bit (a full 1024x2048 dataset pass overflows 32-bit) and
accumulation is associative, so per-image matrices can be merged in any
order. All metrics are reported on a 0-100 scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecodec import LabelMap

IGNORE_LABEL = 255


class MetricsError(ValueError):
    """Inconsistent label maps or an empty confusion matrix."""


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """K x K counts; counts[g][p] = pixels of ground truth g predicted p."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.counts, dtype=np.uint64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise MetricsError(f"counts must be a square K x K matrix, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @classmethod
    def zeros(cls, num_classes: int) -> "ConfusionMatrix":
        if num_classes < 1:
            raise MetricsError(f"class count must be >= 1, got {num_classes}")
        return cls(np.zeros((num_classes, num_classes), dtype=np.uint64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)


@dataclass(frozen=True)
class MetricsReport:
    """Per-class IoU/Acc (None where the class is absent) plus the means.

    Values are percentages. Classes with an empty union (no TP, FP, or FN)
    are excluded from the mIoU mean; classes with no ground-truth pixels
    are excluded from the mAcc mean.
    """

    per_class_iou: tuple
    per_class_acc: tuple
    aAcc: float
    mAcc: float
    mIoU: float


def _first_offender(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask.ravel())[0])


def accumulate(
    cm: ConfusionMatrix,
    gt: LabelMap,
    pred: LabelMap,
    ignore: int = IGNORE_LABEL,
) -> ConfusionMatrix:
    """Add one image pair to the matrix; pixels with gt == ignore are skipped.

    Pure: returns a new matrix. Raises MetricsError on mismatched
    dimensions or out-of-range labels, naming the first offending pixel.
    """
    k = cm.num_classes
    if gt.labels.shape != pred.labels.shape:
        raise MetricsError(
            f"dimension mismatch: gt {gt.width}x{gt.height} vs "
            f"pred {pred.width}x{pred.height}"
        )
    g = gt.labels.astype(np.int64)
    p = pred.labels.astype(np.int64)
    bad_gt = (g >= k) & (g != ignore)
    if bad_gt.any():
        i = _first_offender(bad_gt)
        raise MetricsError(
            f"ground-truth label {int(g.ravel()[i])} out of range at pixel {i}"
        )
    bad_pred = p >= k
    if bad_pred.any():
        i = _first_offender(bad_pred)
        raise MetricsError(
            f"prediction label {int(p.ravel()[i])} out of range at pixel {i}"
        )
    keep = g != ignore
    flat = g[keep] * k + p[keep]
    added = np.bincount(flat, minlength=k * k).reshape(k, k).astype(np.uint64)
    return ConfusionMatrix(cm.counts + added)


def merge(a: ConfusionMatrix, b: ConfusionMatrix) -> ConfusionMatrix:
    """Elementwise sum; associative and commutative."""
    if a.num_classes != b.num_classes:
        raise MetricsError(
            f"class count mismatch: {a.num_classes} vs {b.num_classes}"
        )
    return ConfusionMatrix(a.counts + b.counts)


def compute(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class IoU = 100*TP/(TP+FP+FN), Acc = 100*TP/(TP+FN), and means."""
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total == 0:
        raise MetricsError("no accumulated pixels")
    tp = np.diag(counts)
    fn = counts.sum(axis=1) - tp
    fp = counts.sum(axis=0) - tp
    union = tp + fp + fn
    gt_total = tp + fn

    iou = [
        100.0 * t / u if u > 0 else None
        for t, u in zip(tp, union)
    ]
    acc = [
        100.0 * t / g if g > 0 else None
        for t, g in zip(tp, gt_total)
    ]
    present_iou = [v for v in iou if v is not None]
    present_acc = [v for v in acc if v is not None]
    return MetricsReport(
        per_class_iou=tuple(iou),
        per_class_acc=tuple(acc),
        aAcc=100.0 * tp.sum() / total,
        mAcc=sum(present_acc) / len(present_acc),
        mIoU=sum(present_iou) / len(present_iou),
    )
