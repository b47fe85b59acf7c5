"""Toy discrete visual tokenizer: per-patch mean color on a uniform grid.

Stands in for a learned autoencoder vocabulary. Each patch maps to the
index of its mean-RGB bin in a bins^3 color cube, so an all-black image
tokenizes to index 0 everywhere and all-white to the last index. Any
tokenizer with the same ``vocab_size``/``tokenize`` surface can replace it.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from facerep.errors import InputError


class ColorGridTokenizer:
    def __init__(self, patch_size: int = 16, bins: int = 8):
        if patch_size < 1 or bins < 2:
            raise InputError("need patch_size >= 1 and bins >= 2")
        self.patch_size = patch_size
        self.bins = bins
        self.vocab_size = bins ** 3

    def tokenize(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) pixels in [0, 1] -> (B, N) int64 token indices."""
        if images.ndim != 4 or images.shape[1] != 3:
            raise InputError(f"expected (B, 3, H, W) images, got {tuple(images.shape)}")
        h, w = images.shape[2], images.shape[3]
        if h % self.patch_size or w % self.patch_size:
            raise InputError(
                f"image {h}x{w} not divisible by patch size {self.patch_size}"
            )
        means = F.avg_pool2d(images.to(torch.float64), self.patch_size)
        quantized = torch.clamp((means * self.bins).floor().long(), 0, self.bins - 1)
        r, g, b = quantized[:, 0], quantized[:, 1], quantized[:, 2]
        indices = (r * self.bins + g) * self.bins + b
        return indices.flatten(1)
