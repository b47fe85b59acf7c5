"""Causal text Transformer with the sequence feature read at eos."""

from __future__ import annotations

import torch
from torch import nn

from facerep.errors import InputError
from facerep.encoders.vit import Block, _init_transformer


class TextEncoder(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        depth: int = 12,
        width: int = 512,
        heads: int = 8,
        context_length: int = 77,
    ):
        super().__init__()
        self.depth = depth
        self.width = width
        self.context_length = context_length
        self.vocab_size = vocab_size
        self.token_embedding = nn.Embedding(vocab_size, width)
        self.pos_embedding = nn.Parameter(torch.zeros(context_length, width))
        self.blocks = nn.ModuleList(Block(width, heads) for _ in range(depth))
        self.ln_final = nn.LayerNorm(width)
        nn.init.normal_(self.token_embedding.weight, std=0.02)
        nn.init.normal_(self.pos_embedding, std=0.01)
        for block in self.blocks:
            _init_transformer(block)

    def causal_mask(self, dtype, device) -> torch.Tensor:
        n = self.context_length
        mask = torch.full((n, n), float("-inf"), dtype=dtype, device=device)
        return torch.triu(mask, diagonal=1)

    def forward(self, ids: torch.Tensor) -> list[torch.Tensor]:
        """Per-layer features for a (B, 77) id batch."""
        if ids.ndim != 2 or ids.shape[1] != self.context_length:
            raise InputError(
                f"expected (B, {self.context_length}) token ids, got {tuple(ids.shape)}"
            )
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.vocab_size):
            raise InputError(f"token ids out of range [0, {self.vocab_size})")
        x = self.token_embedding(ids) + self.pos_embedding.to(self.token_embedding.weight.dtype)
        mask = self.causal_mask(x.dtype, x.device)
        features = []
        for block in self.blocks:
            x = block(x, attn_mask=mask)
            features.append(x)
        return features

    def pool_eos(self, features: list[torch.Tensor], eos_positions: torch.Tensor) -> torch.Tensor:
        """Normalized feature at each sequence's eos token."""
        last = features[-1]
        eos_positions = eos_positions.to(dtype=torch.long, device=last.device)
        if eos_positions.ndim != 1 or eos_positions.shape[0] != last.shape[0]:
            raise InputError("eos_positions must be one index per batch row")
        if eos_positions.numel() and (
            int(eos_positions.min()) < 0 or int(eos_positions.max()) >= self.context_length
        ):
            raise InputError(f"eos position out of range [0, {self.context_length})")
        picked = last[torch.arange(last.shape[0], device=last.device), eos_positions]
        return self.ln_final(picked)
