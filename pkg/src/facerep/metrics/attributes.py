"""Attribute accuracy and demographic group comparison."""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np

from facerep.errors import InputError


def mean_accuracy(pred, gt) -> float:
    """Percent accuracy per attribute, averaged over attributes."""
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape or pred.ndim != 2:
        raise InputError(f"expected matching (B, A) arrays, got {pred.shape} vs {gt.shape}")
    if pred.shape[0] == 0:
        raise InputError("empty batch")
    per_attr = (pred == gt).mean(axis=0)
    return float(100.0 * per_attr.mean())


def group_discrepancy(
    acc_by_group: Mapping[str, tuple[float, int]],
    reference: str,
    pooled: Sequence[str],
) -> float:
    """Signed gap between a pooled group accuracy and a reference group.

    ``acc_by_group`` maps group name to (percent accuracy, sample count).
    The pooled accuracy is the sample-weighted mean over ``pooled`` members;
    the result is pooled minus reference, so a positive value means the
    pooled groups score higher.
    """
    if reference not in acc_by_group:
        raise InputError(f"reference group '{reference}' missing")
    if not pooled:
        raise InputError("pooled group set is empty")
    total = 0
    weighted = 0.0
    for name in pooled:
        if name not in acc_by_group:
            raise InputError(f"pooled group '{name}' missing")
        acc, count = acc_by_group[name]
        if count <= 0:
            raise InputError(f"group '{name}' has non-positive count {count}")
        total += count
        weighted += acc * count
    ref_acc = acc_by_group[reference][0]
    return float(weighted / total - ref_acc)
