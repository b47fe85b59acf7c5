"""Dense segmentation head over pyramid-fused backbone features."""

from __future__ import annotations

from collections.abc import Sequence

import torch
import torch.nn.functional as F
from torch import nn

from facerep.errors import ConfigError
from facerep.heads.fusion import (
    PyramidFusion,
    select_features,
    to_spatial,
    validate_tap_layers,
)

DEFAULT_TAP_LAYERS = (4, 6, 8, 12)


class ParsingHead(nn.Module):
    """Per-pixel class logits at a configurable output resolution.

    The background counts as an ordinary class: logits carry ``num_classes``
    channels including it and training uses plain cross entropy over all of
    them.
    """

    def __init__(
        self,
        in_channels: int,
        num_classes: int,
        out_size: int,
        width: int = 256,
        layers: Sequence[int] = DEFAULT_TAP_LAYERS,
    ) -> None:
        super().__init__()
        if num_classes < 2:
            raise ConfigError(f"parsing needs at least 2 classes, got {num_classes}")
        if out_size <= 0:
            raise ConfigError(f"output size must be positive, got {out_size}")
        self.num_classes = num_classes
        self.out_size = out_size
        self.layers = validate_tap_layers(layers)
        self.trunk = PyramidFusion(in_channels, width)
        self.classify = nn.Conv2d(width, num_classes, kernel_size=1)

    def forward(self, features: Sequence[torch.Tensor]) -> torch.Tensor:
        maps = [to_spatial(f) for f in select_features(features, self.layers)]
        fused = self.trunk(maps)
        logits = self.classify(fused)
        return F.interpolate(
            logits,
            size=(self.out_size, self.out_size),
            mode="bilinear",
            align_corners=False,
        )


def parsing_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean cross entropy over every pixel, background included."""
    return F.cross_entropy(logits, labels)
