"""Masked-patch prediction head over a discrete visual vocabulary."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from facerep.errors import InputError
from facerep.encoders.vit import Block, _init_transformer
from facerep.pretraining.masking import MaskSet


class MaskedPatchHead(nn.Module):
    """Small Transformer plus classifier predicting tokens at masked spots.

    Owns the learnable mask vector substituted into the encoder input;
    keeping them together means one checkpoint group covers the whole
    masked-modeling apparatus. Depth is 1 by default, 6 for the deeper
    ablation.
    """

    def __init__(self, width: int, vocab_size: int, depth: int = 1, heads: int = 8):
        super().__init__()
        if depth < 1:
            raise InputError("head depth must be at least 1")
        self.depth = depth
        self.vocab_size = vocab_size
        self.mask_token = nn.Parameter(torch.zeros(width))
        self.blocks = nn.ModuleList(Block(width, heads) for _ in range(depth))
        self.ln = nn.LayerNorm(width)
        self.classifier = nn.Linear(width, vocab_size)
        nn.init.normal_(self.mask_token, std=0.02)
        for block in self.blocks:
            _init_transformer(block)
        nn.init.normal_(self.classifier.weight, std=0.02)
        nn.init.zeros_(self.classifier.bias)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """Token logits (B, 1+N, vocab) from final encoder features."""
        x = features
        for block in self.blocks:
            x = block(x)
        return self.classifier(self.ln(x))

    def loss(self, features: torch.Tensor, mask: MaskSet, targets: torch.Tensor) -> torch.Tensor:
        return mim_forward_loss(self, features, mask, targets)


def mim_forward_loss(
    head: MaskedPatchHead,
    features: torch.Tensor,
    mask: MaskSet,
    targets: torch.Tensor,
) -> torch.Tensor:
    """Mean NLL of the true visual tokens at masked positions.

    ``targets`` are per-patch indices (B, N) from the unmasked image;
    token position p corresponds to patch p - 1.
    """
    if len(mask) == 0:
        raise InputError("mask is empty; nothing to predict")
    if features.ndim != 3:
        raise InputError(f"features must be (B, 1+N, D), got {tuple(features.shape)}")
    if targets.shape != (features.shape[0], features.shape[1] - 1):
        raise InputError(
            f"targets shape {tuple(targets.shape)} does not match features"
        )
    if mask.positions[-1] >= features.shape[1]:
        raise InputError("mask positions exceed sequence length")
    if targets.numel() and (int(targets.min()) < 0 or int(targets.max()) >= head.vocab_size):
        raise InputError(f"targets out of vocabulary range [0, {head.vocab_size})")
    logits = head(features)
    pos = list(mask.positions)
    picked = logits[:, pos]
    patch_targets = targets[:, [p - 1 for p in pos]]
    return F.cross_entropy(
        picked.reshape(-1, head.vocab_size), patch_targets.reshape(-1)
    )
