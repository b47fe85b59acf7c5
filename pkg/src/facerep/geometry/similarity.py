"""Least-squares similarity transforms between point sets.

A transform is stored as a 2x3 float64 matrix ``[A | b]`` acting on row
vectors of (x, y) coordinates as ``p -> A @ p + b``.
"""

from __future__ import annotations

import numpy as np

from facerep.errors import InputError, SingularityError

_DEGENERATE_RTOL = 1e-9


def _as_points(pts, name: str) -> np.ndarray:
    arr = np.asarray(pts, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InputError(f"{name} must have shape (n, 2), got {arr.shape}")
    if arr.shape[0] < 2:
        raise InputError(f"{name} needs at least 2 points, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite coordinates")
    return arr


def _as_transform(t) -> np.ndarray:
    arr = np.asarray(t, dtype=np.float64)
    if arr.shape != (2, 3):
        raise InputError(f"transform must have shape (2, 3), got {arr.shape}")
    return arr


def identity_transform() -> np.ndarray:
    return np.hstack([np.eye(2), np.zeros((2, 1))])


def estimate_similarity(src, dst) -> np.ndarray:
    """Fit scale * rotation + translation mapping ``src`` onto ``dst``.

    Minimizes the mean squared residual over point pairs. Reflections are
    excluded by flipping the sign of the smallest singular value when the
    cross-covariance has negative determinant.

    Raises :class:`SingularityError` when ``src`` is collinear or coincident,
    since the rotation is not identifiable from such configurations.
    """
    s = _as_points(src, "src")
    d = _as_points(dst, "dst")
    if s.shape[0] != d.shape[0]:
        raise InputError(
            f"point counts differ: src has {s.shape[0]}, dst has {d.shape[0]}"
        )
    n = s.shape[0]

    mu_s = s.mean(axis=0)
    mu_d = d.mean(axis=0)
    s0 = s - mu_s
    d0 = d - mu_d

    sv = np.linalg.svd(s0, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] / sv[0] < _DEGENERATE_RTOL:
        raise SingularityError(
            "source points are collinear or coincident; similarity is underdetermined"
        )

    cov = d0.T @ s0 / n
    u, sig, vt = np.linalg.svd(cov)
    sign = np.ones(2)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[-1] = -1.0
    rot = u @ np.diag(sign) @ vt
    var_s = (s0 ** 2).sum() / n
    scale = float(sig @ sign) / var_s
    trans = mu_d - scale * rot @ mu_s
    return np.hstack([scale * rot, trans[:, None]])


def apply_transform(t, pts) -> np.ndarray:
    t = _as_transform(t)
    arr = np.asarray(pts, dtype=np.float64)
    if arr.ndim == 1:
        if arr.shape != (2,):
            raise InputError(f"point must have shape (2,), got {arr.shape}")
        return t[:, :2] @ arr + t[:, 2]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InputError(f"points must have shape (n, 2), got {arr.shape}")
    return arr @ t[:, :2].T + t[:, 2]


def compose(outer, inner) -> np.ndarray:
    """Return the transform applying ``inner`` first, then ``outer``."""
    a = _as_transform(outer)
    b = _as_transform(inner)
    lin = a[:, :2] @ b[:, :2]
    off = a[:, :2] @ b[:, 2] + a[:, 2]
    return np.hstack([lin, off[:, None]])


def invert_transform(t) -> np.ndarray:
    t = _as_transform(t)
    det = np.linalg.det(t[:, :2])
    if abs(det) < 1e-12:
        raise SingularityError("transform is not invertible")
    inv = np.linalg.inv(t[:, :2])
    return np.hstack([inv, (-inv @ t[:, 2])[:, None]])


def resize_transform(src_size: int, dst_size: int) -> np.ndarray:
    """Plain rescale from a ``src_size`` square frame to ``dst_size``.

    Uses the half-pixel-center convention, so warping with this transform
    reproduces an ordinary bilinear resize.
    """
    if src_size < 1 or dst_size < 1:
        raise InputError("frame sizes must be positive")
    k = dst_size / src_size
    off = 0.5 * k - 0.5
    return np.array([[k, 0.0, off], [0.0, k, off]], dtype=np.float64)


def augment_transform(
    t,
    rng: np.random.Generator,
    target_size: int,
    rotation_deg: float,
    scale_range: tuple[float, float] = (0.9, 1.1),
    translation_frac: float = 0.01,
) -> np.ndarray:
    """Jitter an alignment transform for training.

    Draws rotation angle, scale factor, and translation uniformly, then
    applies them about the center of the target frame so a face stays
    roughly centered after augmentation.
    """
    t = _as_transform(t)
    if rotation_deg < 0:
        raise InputError("rotation_deg must be non-negative")
    lo, hi = scale_range
    if not (0 < lo <= hi):
        raise InputError(f"invalid scale_range {scale_range}")
    theta = np.deg2rad(rng.uniform(-rotation_deg, rotation_deg))
    k = rng.uniform(lo, hi)
    shift = rng.uniform(-translation_frac, translation_frac, size=2) * target_size

    c = np.array([target_size / 2.0, target_size / 2.0])
    cos, sin = np.cos(theta), np.sin(theta)
    lin = k * np.array([[cos, -sin], [sin, cos]])
    off = c + shift - lin @ c
    jitter = np.hstack([lin, off[:, None]])
    return compose(jitter, t)


def save_transform(path, t) -> None:
    """Write the six transform entries row-major as decimal text."""
    t = _as_transform(t)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(" ".join(repr(float(v)) for v in t.ravel()) + "\n")


def load_transform(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        vals = fh.read().split()
    if len(vals) != 6:
        raise InputError(f"expected 6 values in transform file {path}, got {len(vals)}")
    return np.array([float(v) for v in vals], dtype=np.float64).reshape(2, 3)
