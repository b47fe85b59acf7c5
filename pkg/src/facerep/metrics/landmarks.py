"""Landmark error metrics: NME, failure rate, and AUC of the error CDF."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from facerep.errors import InputError

NORMALIZERS = ("diag", "box", "inter_ocular")


def diag_normalizer(width: float, height: float) -> float:
    """Ground-truth box diagonal, the AFLW NME_diag convention."""
    return float(np.hypot(width, height))


def box_normalizer(width: float, height: float) -> float:
    """Geometric mean of box sides, sqrt(w * h)."""
    if width < 0 or height < 0:
        raise InputError("box sides must be non-negative")
    return float(np.sqrt(width * height))


def inter_ocular_normalizer(gt, left_eye: int, right_eye: int) -> float:
    """Distance between the outer eye corners of the ground truth."""
    gt = np.asarray(gt, dtype=np.float64)
    n = gt.shape[0]
    if not (0 <= left_eye < n and 0 <= right_eye < n):
        raise InputError(f"eye indices ({left_eye}, {right_eye}) out of range for L={n}")
    return float(np.linalg.norm(gt[left_eye] - gt[right_eye]))


def nme(
    pred,
    gt,
    normalizer: str = "diag",
    box: tuple[float, float] | None = None,
    eye_indices: tuple[int, int] | None = None,
) -> float:
    """Mean per-landmark Euclidean error divided by the normalizer.

    Returns the raw ratio (a box of diagonal 100 and a uniform (3, 4)
    offset gives 0.05); scale to percent only when formatting reports.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 2 or pred.shape[1] != 2:
        raise InputError(f"landmark shapes must match as (L, 2), got {pred.shape} vs {gt.shape}")
    if normalizer in ("diag", "box"):
        if box is None:
            raise InputError(f"normalizer '{normalizer}' needs box=(width, height)")
        d = diag_normalizer(*box) if normalizer == "diag" else box_normalizer(*box)
    elif normalizer == "inter_ocular":
        if eye_indices is None:
            raise InputError("normalizer 'inter_ocular' needs eye_indices=(left, right)")
        d = inter_ocular_normalizer(gt, *eye_indices)
    else:
        raise InputError(f"unknown normalizer '{normalizer}', expected one of {NORMALIZERS}")
    if d <= 0:
        raise InputError(f"normalizer evaluated to {d}; must be positive")
    return float(np.linalg.norm(pred - gt, axis=1).mean() / d)


@dataclass
class CEDCurve:
    """Sorted per-image NME values backing the cumulative error distribution."""

    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).ravel()
        if vals.size and (not np.all(np.isfinite(vals)) or vals.min() < 0):
            raise InputError("NME values must be finite and non-negative")
        self.values = np.sort(vals)

    def __len__(self) -> int:
        return self.values.size


def _check_nmes(nmes, tau: float) -> np.ndarray:
    if tau <= 0:
        raise InputError(f"tau must be positive, got {tau}")
    vals = CEDCurve(np.asarray(nmes, dtype=np.float64)).values
    if vals.size == 0:
        raise InputError("need at least one NME value")
    return vals


def failure_rate(nmes, tau: float) -> float:
    """Percent of images whose NME exceeds tau (same ratio units as NME)."""
    vals = _check_nmes(nmes, tau)
    return float(100.0 * np.count_nonzero(vals > tau) / vals.size)


def auc_ced(nmes, tau: float) -> float:
    """Area under the empirical CDF of NME over [0, tau], as a percent.

    The CDF is a step function, so the area has the closed form
    mean(max(0, tau - x)) / tau; no binning is involved.
    """
    vals = _check_nmes(nmes, tau)
    return float(100.0 * np.maximum(0.0, tau - vals).mean() / tau)
