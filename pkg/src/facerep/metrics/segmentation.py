"""Segmentation F1 over label maps.

Per-class F1 = 2TP / (2TP + FP + FN), reported in percent. A class absent
from both prediction and ground truth has no defined F1 and is excluded
from the mean; the mean also excludes the background class 0, matching how
face-parsing benchmarks report their per-component tables.
"""

from __future__ import annotations

import numpy as np

from facerep.errors import InputError


class ConfusionAccumulator:
    """Per-class TP/FP/FN pixel counts, mergeable for map-reduce evaluation."""

    def __init__(self, num_classes: int):
        if num_classes < 1:
            raise InputError("num_classes must be positive")
        self.num_classes = num_classes
        self.tp = np.zeros(num_classes, dtype=np.int64)
        self.fp = np.zeros(num_classes, dtype=np.int64)
        self.fn = np.zeros(num_classes, dtype=np.int64)

    def update(self, pred, gt) -> "ConfusionAccumulator":
        pred = np.asarray(pred)
        gt = np.asarray(gt)
        if pred.shape != gt.shape:
            raise InputError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
        if not (np.issubdtype(pred.dtype, np.integer) and np.issubdtype(gt.dtype, np.integer)):
            raise InputError("label maps must be integer-typed")
        n = self.num_classes
        if pred.size and (pred.min() < 0 or pred.max() >= n or gt.min() < 0 or gt.max() >= n):
            raise InputError(f"labels out of range [0, {n})")
        joint = np.bincount(
            (gt.ravel() * n + pred.ravel()).astype(np.int64), minlength=n * n
        ).reshape(n, n)
        diag = np.diagonal(joint)
        self.tp += diag
        self.fp += joint.sum(axis=0) - diag
        self.fn += joint.sum(axis=1) - diag
        return self

    def merge(self, other: "ConfusionAccumulator") -> "ConfusionAccumulator":
        if other.num_classes != self.num_classes:
            raise InputError("cannot merge accumulators with different class counts")
        out = ConfusionAccumulator(self.num_classes)
        out.tp = self.tp + other.tp
        out.fp = self.fp + other.fp
        out.fn = self.fn + other.fn
        return out

    def per_class_f1(self) -> np.ndarray:
        """Percent F1 per class; NaN where the class never occurred."""
        denom = 2 * self.tp + self.fp + self.fn
        out = np.full(self.num_classes, np.nan)
        seen = denom > 0
        out[seen] = 100.0 * 2 * self.tp[seen] / denom[seen]
        return out

    def mean_f1(self) -> float:
        """Mean percent F1 over defined foreground classes (class 0 excluded)."""
        scores = self.per_class_f1()[1:]
        defined = ~np.isnan(scores)
        if not defined.any():
            return float("nan")
        return float(scores[defined].mean())


def f1_scores(pred, gt, num_classes: int) -> tuple[np.ndarray, float]:
    """One-shot per-class F1 (percent, NaN for unseen classes) and the mean."""
    acc = ConfusionAccumulator(num_classes)
    acc.update(pred, gt)
    return acc.per_class_f1(), acc.mean_f1()
