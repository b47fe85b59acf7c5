"""Image and label-map file I/O via Pillow."""

from __future__ import annotations

import numpy as np
from PIL import Image

from facerep.errors import InputError


def load_image(path) -> np.ndarray:
    """Read an RGB image as float64 (H, W, 3) in [0, 1]."""
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    return arr / 255.0


def save_image(path, array) -> None:
    """Write a float [0, 1] or uint8 array as an image file."""
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(np.asarray(arr, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    if arr.ndim == 2:
        Image.fromarray(arr, mode="L").save(path)
    elif arr.ndim == 3 and arr.shape[2] == 3:
        Image.fromarray(arr, mode="RGB").save(path)
    else:
        raise InputError(f"unsupported image shape {arr.shape}")


def load_label_map(path) -> np.ndarray:
    """Read a single-channel label image as int64 (H, W)."""
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "P", "I"):
                img = img.convert("L")
            arr = np.asarray(img)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read label map {path}: {exc}") from exc
    if arr.ndim != 2:
        raise InputError(f"label map {path} is not single-channel")
    return arr.astype(np.int64)


def save_label_map(path, labels) -> None:
    arr = np.asarray(labels)
    if arr.ndim != 2 or not np.issubdtype(arr.dtype, np.integer):
        raise InputError("label map must be a 2-D integer array")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise InputError("label values must fit in [0, 255]")
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path)
