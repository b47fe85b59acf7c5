"""Landmark heatmap rendering and sub-pixel decoding."""

from __future__ import annotations

import numpy as np

from facerep.errors import InputError

HEATMAP_SIZE = 128
_WINDOW = 2  # decode refines over a (2*_WINDOW + 1)^2 patch around the argmax


def render_heatmap(points, size: int = HEATMAP_SIZE) -> np.ndarray:
    """Render one unit-peak Gaussian (sigma = 1 px) per landmark.

    Returns (L, size, size) float64 with values clamped to [0, 1]. Points may
    lie outside the frame; their tails still contribute.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError(f"points must have shape (L, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InputError("points contain non-finite coordinates")
    if size < 1:
        raise InputError("size must be positive")
    ys, xs = np.meshgrid(
        np.arange(size, dtype=np.float64),
        np.arange(size, dtype=np.float64),
        indexing="ij",
    )
    d2 = (xs[None] - pts[:, 0, None, None]) ** 2 + (ys[None] - pts[:, 1, None, None]) ** 2
    return np.clip(np.exp(-0.5 * d2), 0.0, 1.0)


def decode_heatmap(maps, logits: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Recover landmark coordinates from per-channel maps.

    Takes the argmax pixel, then refines with a weighted centroid over the
    surrounding 5x5 window. For probability-like maps the window values are
    normalized to sum 1 and used as weights directly; with ``logits=True``
    a softmax over the window is used instead.

    Returns ``(coords, degenerate)`` where ``coords`` is (L, 2) float64 and
    ``degenerate`` flags channels that were constant (their coordinate is
    reported as the first pixel and should not be trusted).
    """
    arr = np.asarray(maps, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise InputError(f"maps must be (L, H, W), got shape {np.shape(maps)}")
    n, h, w = arr.shape
    coords = np.zeros((n, 2), dtype=np.float64)
    degenerate = np.zeros(n, dtype=bool)
    for i in range(n):
        chan = arr[i]
        if chan.max() == chan.min():
            degenerate[i] = True
            continue
        y0, x0 = np.unravel_index(np.argmax(chan), (h, w))
        ylo, yhi = max(0, y0 - _WINDOW), min(h, y0 + _WINDOW + 1)
        xlo, xhi = max(0, x0 - _WINDOW), min(w, x0 + _WINDOW + 1)
        win = chan[ylo:yhi, xlo:xhi]
        if logits:
            wgt = np.exp(win - win.max())
        else:
            wgt = win - min(win.min(), 0.0)
        total = wgt.sum()
        if total <= 0:
            coords[i] = (x0, y0)
            continue
        wgt = wgt / total
        yy, xx = np.meshgrid(
            np.arange(ylo, yhi, dtype=np.float64),
            np.arange(xlo, xhi, dtype=np.float64),
            indexing="ij",
        )
        coords[i] = ((wgt * xx).sum(), (wgt * yy).sum())
    return coords, degenerate
