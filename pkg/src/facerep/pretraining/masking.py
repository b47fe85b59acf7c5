"""Patch mask sampling and substitution for masked image modeling.

Token index 0 is the cls token and is never maskable; patch tokens are
indexed 1..N. Substitution happens on pre-positional patch embeddings, so
positional information is re-added afterwards by the encoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from facerep.errors import InputError

MAX_MASKED = 75


@dataclass(frozen=True)
class MaskSet:
    """Sorted unique patch-token positions. Sampling always yields at least
    one position; an empty set is accepted only as a test bypass."""

    positions: tuple[int, ...]

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        if len(set(pos)) != len(pos):
            raise InputError("mask positions must be unique")
        if any(p < 0 for p in pos):
            raise InputError("mask positions must be non-negative")
        object.__setattr__(self, "positions", tuple(sorted(pos)))

    def __len__(self) -> int:
        return len(self.positions)


def sample_mask(n: int, max_masked: int, rng: np.random.Generator) -> MaskSet:
    """Draw |M| uniformly from 1..max_masked, then positions from 1..n."""
    if n < 1:
        raise InputError("sequence needs at least one patch")
    if not (1 <= max_masked <= n):
        raise InputError(f"max_masked must be in [1, {n}], got {max_masked}")
    size = int(rng.integers(1, max_masked + 1))
    positions = rng.choice(np.arange(1, n + 1), size=size, replace=False)
    return MaskSet(tuple(int(p) for p in positions))


def apply_mask(tokens: torch.Tensor, mask: MaskSet, mask_token: torch.Tensor) -> torch.Tensor:
    """Replace masked patch positions with the learnable mask vector."""
    if tokens.ndim != 3:
        raise InputError(f"tokens must be (B, 1+N, D), got {tuple(tokens.shape)}")
    if mask_token.shape != (tokens.shape[2],):
        raise InputError(
            f"mask token dim {tuple(mask_token.shape)} does not match width {tokens.shape[2]}"
        )
    if len(mask) == 0:
        return tokens
    if 0 in mask.positions:
        raise InputError("cls position 0 cannot be masked")
    if mask.positions[-1] >= tokens.shape[1]:
        raise InputError(
            f"mask position {mask.positions[-1]} exceeds sequence length {tokens.shape[1]}"
        )
    out = tokens.clone()
    out[:, list(mask.positions)] = mask_token.to(tokens.dtype)
    return out
