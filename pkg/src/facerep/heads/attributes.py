"""Multi-label attribute head over pooled multi-layer features.

Each tapped layer contributes three width-sized vectors: the cls token, the
mean over patch tokens, and the per-dimension max over patch tokens.  Every
vector is layer-normalized without learned affine parameters, the collection
is combined through learnable scalar weights, and a single linear layer maps
the blend to attribute logits.
"""

from __future__ import annotations

from collections.abc import Sequence

import torch
import torch.nn.functional as F
from torch import nn

from facerep.errors import ConfigError, InputError
from facerep.heads.fusion import select_features, validate_tap_layers
from facerep.heads.parsing import DEFAULT_TAP_LAYERS

_VECTORS_PER_LAYER = 3


def pooled_vectors(tokens: torch.Tensor) -> list[torch.Tensor]:
    """cls, patch mean, and patch max vectors from one layer, normalized."""
    if tokens.ndim != 3 or tokens.shape[1] < 2:
        raise InputError(f"expected (B, 1+N, C) with N >= 1, got {tuple(tokens.shape)}")
    shape = (tokens.shape[-1],)
    cls = tokens[:, 0, :]
    patches = tokens[:, 1:, :]
    raw = [cls, patches.mean(dim=1), patches.max(dim=1).values]
    return [F.layer_norm(v, shape) for v in raw]


class AttributeHead(nn.Module):
    """Binary attribute logits from a weighted blend of pooled vectors."""

    def __init__(
        self,
        in_channels: int,
        num_attributes: int = 40,
        layers: Sequence[int] = DEFAULT_TAP_LAYERS,
    ) -> None:
        super().__init__()
        if num_attributes <= 0:
            raise ConfigError(
                f"attribute count must be positive, got {num_attributes}"
            )
        self.num_attributes = num_attributes
        self.layers = validate_tap_layers(layers)
        count = _VECTORS_PER_LAYER * len(self.layers)
        self.combine = nn.Parameter(torch.full((count,), 1.0 / count))
        self.classify = nn.Linear(in_channels, num_attributes)

    def forward(self, features: Sequence[torch.Tensor]) -> torch.Tensor:
        vectors: list[torch.Tensor] = []
        for layer in select_features(features, self.layers):
            vectors.extend(pooled_vectors(layer))
        stacked = torch.stack(vectors, dim=0)
        blended = torch.einsum("v,vbc->bc", self.combine, stacked)
        return self.classify(blended)


def attribute_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross entropy over all attributes."""
    return F.binary_cross_entropy_with_logits(logits, labels.to(logits.dtype))
