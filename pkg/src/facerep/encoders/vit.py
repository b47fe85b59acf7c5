"""Vision Transformer that records token features after every block."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from facerep.errors import InputError


class Block(nn.Module):
    """Pre-norm Transformer block.

    ``forward`` is split so callers can intercept the first normalization
    output (``finish`` resumes from it); saliency hooks rely on this.
    """

    def __init__(self, width: int, heads: int):
        super().__init__()
        self.ln_1 = nn.LayerNorm(width)
        self.attn = nn.MultiheadAttention(width, heads, batch_first=True)
        self.ln_2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, 4 * width),
            nn.GELU(),
            nn.Linear(4 * width, width),
        )

    def forward(self, x, attn_mask=None):
        return self.finish(x, self.ln_1(x), attn_mask)

    def finish(self, x, normed, attn_mask=None):
        attended, _ = self.attn(normed, normed, normed, need_weights=False, attn_mask=attn_mask)
        x = x + attended
        return x + self.mlp(self.ln_2(x))


def _init_transformer(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, nn.Linear):
            nn.init.normal_(m.weight, std=0.02)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.MultiheadAttention):
            nn.init.normal_(m.in_proj_weight, std=0.02)
            nn.init.zeros_(m.in_proj_bias)


class ImageEncoder(nn.Module):
    """Patch embedding, learned positions, and a stack of blocks.

    Every block output is recorded, so downstream heads can read layer k
    directly and the result provably equals a forward truncated at k.
    """

    def __init__(
        self,
        depth: int = 12,
        width: int = 768,
        heads: int = 12,
        patch_size: int = 16,
        image_size: int = 224,
    ):
        super().__init__()
        if image_size % patch_size != 0:
            raise InputError(
                f"image_size {image_size} not divisible by patch_size {patch_size}"
            )
        self.depth = depth
        self.width = width
        self.patch_size = patch_size
        self.image_size = image_size
        self.grid = image_size // patch_size
        self.num_patches = self.grid * self.grid
        self.patch_embed = nn.Conv2d(3, width, kernel_size=patch_size, stride=patch_size, bias=False)
        self.cls_token = nn.Parameter(torch.zeros(width))
        self.pos_embedding = nn.Parameter(torch.zeros(1 + self.num_patches, width))
        self.blocks = nn.ModuleList(Block(width, heads) for _ in range(depth))
        self.ln_post = nn.LayerNorm(width)
        nn.init.normal_(self.cls_token, std=0.02)
        nn.init.normal_(self.pos_embedding, std=0.02)
        nn.init.normal_(self.patch_embed.weight, std=0.02)
        for block in self.blocks:
            _init_transformer(block)

    def _check_images(self, images: torch.Tensor) -> None:
        if images.ndim != 4 or images.shape[1] != 3:
            raise InputError(f"expected (B, 3, H, W) images, got {tuple(images.shape)}")
        h, w = images.shape[2], images.shape[3]
        if h != self.image_size or w != self.image_size:
            raise InputError(
                f"encoder configured for {self.image_size}x{self.image_size}, "
                f"got {h}x{w}"
            )
        if images.numel() and (float(images.min()) < 0.0 or float(images.max()) > 1.0):
            raise InputError("pixel values must lie in [0, 1]")

    def embed_tokens(self, images: torch.Tensor) -> torch.Tensor:
        """Patch projections with the cls token prepended, before positions.

        Masked-patch substitution happens on this representation.
        """
        self._check_images(images)
        patches = self.patch_embed(images)
        patches = patches.flatten(2).transpose(1, 2)
        cls = self.cls_token.to(patches.dtype).expand(patches.shape[0], 1, -1)
        return torch.cat([cls, patches], dim=1)

    def encode_tokens(self, tokens: torch.Tensor) -> list[torch.Tensor]:
        """Add positions and run the stack, returning one tensor per layer."""
        if tokens.shape[1] != 1 + self.num_patches:
            raise InputError(
                f"expected {1 + self.num_patches} tokens, got {tokens.shape[1]}"
            )
        x = tokens + self.pos_embedding.to(tokens.dtype)
        features = []
        for block in self.blocks:
            x = block(x)
            features.append(x)
        return features

    def forward(self, images: torch.Tensor) -> list[torch.Tensor]:
        return self.encode_tokens(self.embed_tokens(images))

    def pool_cls(self, features: list[torch.Tensor]) -> torch.Tensor:
        """Normalized cls vector from the final layer, ready for projection."""
        return self.ln_post(features[-1][:, 0])


def interpolate_pos_embeddings(pe: torch.Tensor, target_grid: int) -> torch.Tensor:
    """Grow a square positional-embedding table to a finer grid.

    The cls row is copied unchanged; the spatial rows are resampled
    bicubically per channel. Shrinking is refused.
    """
    if pe.ndim != 2:
        raise InputError(f"expected (1+N, C) table, got shape {tuple(pe.shape)}")
    n = pe.shape[0] - 1
    grid = math.isqrt(n)
    if grid * grid != n:
        raise InputError(f"positional table covers {n} patches; not a square grid")
    if target_grid == grid:
        return pe.clone()
    if target_grid < grid:
        raise InputError(f"target grid {target_grid} smaller than source {grid}")
    cls_row = pe[:1]
    channels = pe.shape[1]
    spatial = pe[1:].transpose(0, 1).reshape(1, channels, grid, grid)
    up = F.interpolate(
        spatial, size=(target_grid, target_grid), mode="bicubic", align_corners=False
    )
    up = up.reshape(channels, target_grid * target_grid).transpose(0, 1)
    return torch.cat([cls_row, up], dim=0)
