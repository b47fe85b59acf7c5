"""Feature pyramid built from transformer layer outputs.

Dense heads consume four intermediate layers of the image encoder.  Each
layer yields a token sequence that reshapes into a square map at the patch
grid resolution; the four maps are resampled to strides forming a coarse to
fine pyramid, projected to a common width, merged top-down with a pooled
context branch at the deepest level, and fused at the finest level into a
single feature map.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import torch
import torch.nn.functional as F
from torch import nn

from facerep.errors import ConfigError, InputError

# Finest to coarsest, as multiples of the patch grid size.
_LEVEL_SCALES = (4.0, 2.0, 1.0, 0.5)


def validate_tap_layers(layers: Sequence[int]) -> tuple[int, ...]:
    """Check a one-based tap layer selection; returns it as a tuple."""
    if len(layers) != len(_LEVEL_SCALES):
        raise ConfigError(
            f"expected {len(_LEVEL_SCALES)} tap layers, got {len(layers)}"
        )
    if list(layers) != sorted(set(layers)):
        raise ConfigError(f"tap layers must be strictly increasing, got {layers}")
    if layers[0] < 1:
        raise ConfigError(f"tap layers are one-based, got {layers}")
    return tuple(layers)


def select_features(
    features: Sequence[torch.Tensor], layers: Sequence[int]
) -> list[torch.Tensor]:
    """Pick per-layer token features by one-based layer index."""
    chosen = validate_tap_layers(layers)
    for k in chosen:
        if k > len(features):
            raise ConfigError(
                f"tap layer {k} outside recorded range 1..{len(features)}"
            )
    return [features[k - 1] for k in chosen]


def to_spatial(tokens: torch.Tensor) -> torch.Tensor:
    """Drop the cls token and reshape (B, 1+N, C) to (B, C, g, g)."""
    if tokens.ndim != 3:
        raise InputError(f"expected (B, tokens, C), got shape {tuple(tokens.shape)}")
    n = tokens.shape[1] - 1
    grid = math.isqrt(n)
    if grid * grid != n:
        raise InputError(f"{n} patch tokens do not form a square grid")
    patches = tokens[:, 1:, :]
    return patches.transpose(1, 2).reshape(tokens.shape[0], tokens.shape[2], grid, grid)


class PyramidFusion(nn.Module):
    """Four-level lateral/top-down fusion producing one map at 4x patch grid."""

    def __init__(self, in_channels: int, width: int = 256) -> None:
        super().__init__()
        if in_channels <= 0 or width <= 0:
            raise ConfigError("fusion channel counts must be positive")
        self.in_channels = in_channels
        self.width = width
        self.lateral = nn.ModuleList(
            nn.Conv2d(in_channels, width, kernel_size=1) for _ in _LEVEL_SCALES
        )
        # Global context injected at the deepest level before the merge.
        self.context = nn.Conv2d(width, width, kernel_size=1)
        self.smooth = nn.ModuleList(
            nn.Conv2d(width, width, kernel_size=3, padding=1) for _ in _LEVEL_SCALES
        )
        self.fuse = nn.Conv2d(width * len(_LEVEL_SCALES), width, kernel_size=3, padding=1)

    def _resample(self, maps: list[torch.Tensor]) -> list[torch.Tensor]:
        grid = maps[0].shape[-1]
        out = []
        for scale, fmap in zip(_LEVEL_SCALES, maps):
            target = max(1, int(round(grid * scale)))
            if fmap.shape[-1] == target:
                out.append(fmap)
            else:
                out.append(
                    F.interpolate(
                        fmap, size=(target, target), mode="bilinear", align_corners=False
                    )
                )
        return out

    def forward(self, maps: Sequence[torch.Tensor]) -> torch.Tensor:
        if len(maps) != len(_LEVEL_SCALES):
            raise InputError(f"expected {len(_LEVEL_SCALES)} maps, got {len(maps)}")
        base = maps[0].shape
        for fmap in maps:
            if fmap.ndim != 4 or fmap.shape != base:
                raise InputError("pyramid inputs must share one (B, C, g, g) shape")
            if fmap.shape[1] != self.in_channels:
                raise InputError(
                    f"expected {self.in_channels} channels, got {fmap.shape[1]}"
                )
        levels = self._resample(list(maps))
        laterals = [conv(fmap) for conv, fmap in zip(self.lateral, levels)]
        deepest = laterals[-1]
        pooled = deepest.mean(dim=(2, 3), keepdim=True)
        laterals[-1] = deepest + self.context(pooled)
        for i in range(len(laterals) - 2, -1, -1):
            upsampled = F.interpolate(
                laterals[i + 1],
                size=laterals[i].shape[-2:],
                mode="bilinear",
                align_corners=False,
            )
            laterals[i] = laterals[i] + upsampled
        smoothed = [conv(fmap) for conv, fmap in zip(self.smooth, laterals)]
        finest = smoothed[0].shape[-2:]
        aligned = [smoothed[0]] + [
            F.interpolate(fmap, size=finest, mode="bilinear", align_corners=False)
            for fmap in smoothed[1:]
        ]
        return self.fuse(torch.cat(aligned, dim=1))
