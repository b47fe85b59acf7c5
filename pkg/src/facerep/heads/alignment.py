"""Landmark heatmap regression head.

Predicts one logit map per landmark at a fixed 128x128 resolution and trains
against rendered Gaussian targets with a soft-label cross entropy: the target
map is normalized into a distribution over pixels and scored against the
softmax of the predicted map.
"""

from __future__ import annotations

import warnings
from collections.abc import Sequence

import torch
import torch.nn.functional as F
from torch import nn

from facerep.errors import ConfigError, InputError
from facerep.heads.fusion import (
    PyramidFusion,
    select_features,
    to_spatial,
    validate_tap_layers,
)
from facerep.heads.parsing import DEFAULT_TAP_LAYERS

HEATMAP_SIZE = 128


class AlignmentHead(nn.Module):
    """Per-landmark logit maps at ``HEATMAP_SIZE`` resolution."""

    def __init__(
        self,
        in_channels: int,
        num_landmarks: int,
        width: int = 256,
        layers: Sequence[int] = DEFAULT_TAP_LAYERS,
    ) -> None:
        super().__init__()
        if num_landmarks <= 0:
            raise ConfigError(f"landmark count must be positive, got {num_landmarks}")
        self.num_landmarks = num_landmarks
        self.layers = validate_tap_layers(layers)
        self.trunk = PyramidFusion(in_channels, width)
        self.predict = nn.Conv2d(width, num_landmarks, kernel_size=1)

    def forward(self, features: Sequence[torch.Tensor]) -> torch.Tensor:
        maps = [to_spatial(f) for f in select_features(features, self.layers)]
        logits = self.predict(self.trunk(maps))
        return F.interpolate(
            logits,
            size=(HEATMAP_SIZE, HEATMAP_SIZE),
            mode="bilinear",
            align_corners=False,
        )


def soft_label_ce(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Cross entropy between per-channel softmax maps and soft targets.

    Each target channel is normalized to sum to one before scoring, so inputs
    may be unnormalized heatmaps.  Channels whose target is identically zero
    carry no supervision; they are dropped from the average with a warning.
    The result is the mean over the remaining channels (and batch entries).
    """
    if logits.ndim == 3:
        return soft_label_ce(logits[None], targets[None])
    if logits.ndim != 4:
        raise InputError(f"expected (B, L, H, W) logits, got shape {tuple(logits.shape)}")
    if logits.shape != targets.shape:
        raise InputError(
            f"logits shape {tuple(logits.shape)} != targets shape {tuple(targets.shape)}"
        )
    if bool((targets < 0).any()):
        raise InputError("soft label targets must be non-negative")
    b, l, h, w = logits.shape
    flat_logits = logits.reshape(b * l, h * w)
    flat_targets = targets.reshape(b * l, h * w)
    mass = flat_targets.sum(dim=1)
    keep = mass > 0
    if not bool(keep.any()):
        raise InputError("every target channel is zero; nothing to supervise")
    if not bool(keep.all()):
        dropped = int((~keep).sum())
        warnings.warn(
            f"soft_label_ce: {dropped} zero target channel(s) excluded from the loss",
            stacklevel=2,
        )
    log_probs = F.log_softmax(flat_logits[keep], dim=1)
    normalized = flat_targets[keep] / mass[keep][:, None]
    return -(normalized * log_probs).sum(dim=1).mean()
