"""Image warping with an optional tanh periphery squeeze.

The warp maps an aligned face frame into a fixed-size output. Inside
``[-1 + alpha, 1 - alpha]`` (normalized coordinates) the mapping is the
identity, so the central face region keeps its metric layout; outside,
coordinates are squeezed through a scaled tanh so the entire source plane
lands inside the output frame. ``alpha = 1`` reduces to a vanilla tanh
warp; as ``alpha`` approaches 0 the warp degenerates to a plain crop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from facerep.errors import InputError
from facerep.geometry.similarity import apply_transform, invert_transform

DEFAULT_ALPHA = 0.8


@dataclass(frozen=True)
class WarpConfig:
    """Settings for the periphery squeeze applied on top of alignment."""

    enabled: bool = False
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if self.enabled and not (0.0 < self.alpha <= 1.0):
            raise InputError(f"alpha must lie in (0, 1], got {self.alpha}")


def tanh_warp(x, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Squeeze the real line into (-1, 1), identity on the central band.

    Odd function; continuously differentiable at the band edges because the
    tanh branch has unit slope where it takes over.
    """
    if not (0.0 < alpha <= 1.0):
        raise InputError(f"alpha must lie in (0, 1], got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    edge = 1.0 - alpha
    out = np.where(
        np.abs(x) <= edge,
        x,
        np.sign(x) * (alpha * np.tanh((np.abs(x) - edge) / alpha) + edge),
    )
    if out.ndim == 0:
        return float(out)
    return out


def inverse_tanh_warp(y, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Inverse of :func:`tanh_warp`; defined on (-1, 1)."""
    if not (0.0 < alpha <= 1.0):
        raise InputError(f"alpha must lie in (0, 1], got {alpha}")
    y = np.asarray(y, dtype=np.float64)
    if np.any(np.abs(y) >= 1.0):
        raise InputError("inverse warp inputs must lie strictly inside (-1, 1)")
    edge = 1.0 - alpha
    inner = np.abs(y) <= edge
    # arctanh argument stays in [0, 1) because |y| < 1 on the outer branch.
    outer_arg = (np.minimum(np.abs(y), 1.0 - 1e-15) - edge) / alpha
    out = np.where(
        inner,
        y,
        np.sign(y) * (alpha * np.arctanh(np.where(inner, 0.0, outer_arg)) + edge),
    )
    if out.ndim == 0:
        return float(out)
    return out


def _normalize(p, size: int) -> np.ndarray:
    return (np.asarray(p, dtype=np.float64) + 0.5) * (2.0 / size) - 1.0


def _denormalize(n, size: int) -> np.ndarray:
    return (np.asarray(n, dtype=np.float64) + 1.0) * (size / 2.0) - 0.5


def transform_points(pts, t, out_size: int, warp: WarpConfig | None = None) -> np.ndarray:
    """Map source-image points into the warped output frame."""
    q = apply_transform(t, pts)
    if warp is None or not warp.enabled:
        return q
    n = tanh_warp(_normalize(q, out_size), warp.alpha)
    return _denormalize(n, out_size)


def inverse_transform_points(pts, t, out_size: int, warp: WarpConfig | None = None) -> np.ndarray:
    """Map output-frame points back to the source image."""
    pts = np.asarray(pts, dtype=np.float64)
    if warp is not None and warp.enabled:
        u = inverse_tanh_warp(_normalize(pts, out_size), warp.alpha)
        pts = _denormalize(u, out_size)
    return apply_transform(invert_transform(t), pts)


def _source_grid(t, out_size: int, warp: WarpConfig | None) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.meshgrid(
        np.arange(out_size, dtype=np.float64),
        np.arange(out_size, dtype=np.float64),
        indexing="ij",
    )
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    if warp is not None and warp.enabled:
        n = _normalize(pts, out_size)
        # Clamp so border pixel centers stay finite under the inverse squeeze.
        n = np.clip(n, -1.0 + 1e-12, 1.0 - 1e-12)
        pts = _denormalize(inverse_tanh_warp(n, warp.alpha), out_size)
    src = apply_transform(invert_transform(t), pts)
    return src[:, 0].reshape(out_size, out_size), src[:, 1].reshape(out_size, out_size)


def _bilinear(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h, w = image.shape[:2]
    chans = image.reshape(h, w, -1).astype(np.float64)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    dx = xs - x0
    dy = ys - y0

    out = np.zeros(xs.shape + (chans.shape[2],), dtype=np.float64)
    for oy, ox, wgt in (
        (0, 0, (1 - dy) * (1 - dx)),
        (0, 1, (1 - dy) * dx),
        (1, 0, dy * (1 - dx)),
        (1, 1, dy * dx),
    ):
        yy = y0 + oy
        xx = x0 + ox
        valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        vals = np.zeros_like(out)
        vals[valid] = chans[yy[valid], xx[valid]]
        out += wgt[..., None] * vals
    if image.ndim == 2:
        return out[..., 0]
    return out


def _nearest(image: np.ndarray, xs: np.ndarray, ys: np.ndarray, fill) -> np.ndarray:
    h, w = image.shape[:2]
    xi = np.rint(xs).astype(np.int64)
    yi = np.rint(ys).astype(np.int64)
    valid = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
    out = np.full(xs.shape + image.shape[2:], fill, dtype=image.dtype)
    out[valid] = image[yi[valid], xi[valid]]
    return out


def warp_image(image, t, out_size: int, warp: WarpConfig | None = None) -> np.ndarray:
    """Resample ``image`` into the output frame with bilinear interpolation.

    Pixels that fall outside the source are zero. Accepts (H, W) or
    (H, W, C) float arrays; output is float64 with the same channel layout.
    """
    image = np.asarray(image)
    if image.ndim not in (2, 3):
        raise InputError(f"image must be (H, W) or (H, W, C), got shape {image.shape}")
    if out_size < 1:
        raise InputError("out_size must be positive")
    xs, ys = _source_grid(t, out_size, warp)
    return _bilinear(image, xs, ys)


def warp_label_map(labels, t, out_size: int, warp: WarpConfig | None = None, fill: int = 0) -> np.ndarray:
    """Resample an integer label map with nearest-neighbor interpolation."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise InputError(f"label map must be 2-D, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise InputError(f"label map must be integer-typed, got {labels.dtype}")
    xs, ys = _source_grid(t, out_size, warp)
    return _nearest(labels, xs, ys, fill)
