"""Bundled two-tower model with metric projection heads."""

from __future__ import annotations

from dataclasses import dataclass, replace

import torch
from torch import nn

from facerep.errors import InputError, NumericalError
from facerep.encoders.text import TextEncoder
from facerep.encoders.vit import ImageEncoder, interpolate_pos_embeddings


@dataclass(frozen=True)
class ModelConfig:
    image_depth: int = 12
    image_width: int = 768
    image_heads: int = 12
    patch_size: int = 16
    image_size: int = 224
    text_depth: int = 12
    text_width: int = 512
    text_heads: int = 8
    context_length: int = 77
    vocab_size: int = 512
    embed_dim: int = 512
    proj_depth: int = 1

    def __post_init__(self):
        for name in ("image_depth", "image_width", "image_heads", "patch_size",
                     "image_size", "text_depth", "text_width", "text_heads",
                     "context_length", "vocab_size", "embed_dim", "proj_depth"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be positive")
        if self.image_width % self.image_heads != 0:
            raise InputError("image_width must divide evenly into heads")
        if self.text_width % self.text_heads != 0:
            raise InputError("text_width must divide evenly into heads")


class ProjectionHead(nn.Module):
    """Maps a tower feature to the shared metric space, unit-normalized.

    Depth 1 is a single linear map; deeper heads insert GELU-separated
    hidden layers at the output width.
    """

    def __init__(self, in_dim: int, out_dim: int, depth: int = 1):
        super().__init__()
        if depth < 1:
            raise InputError("projection depth must be at least 1")
        layers: list[nn.Module] = [nn.Linear(in_dim, out_dim)]
        for _ in range(depth - 1):
            layers.append(nn.GELU())
            layers.append(nn.Linear(out_dim, out_dim))
        self.mlp = nn.Sequential(*layers)
        for m in self.mlp:
            if isinstance(m, nn.Linear):
                nn.init.normal_(m.weight, std=in_dim ** -0.5)
                nn.init.zeros_(m.bias)

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        z = self.mlp(f)
        norm = z.norm(dim=-1, keepdim=True)
        if bool((norm < 1e-12).any()):
            raise NumericalError("projection produced a zero vector; cannot normalize")
        return z / norm


class VisualLinguisticModel(nn.Module):
    def __init__(self, config: ModelConfig = ModelConfig()):
        super().__init__()
        self.config = config
        self.image_encoder = ImageEncoder(
            depth=config.image_depth,
            width=config.image_width,
            heads=config.image_heads,
            patch_size=config.patch_size,
            image_size=config.image_size,
        )
        self.text_encoder = TextEncoder(
            vocab_size=config.vocab_size,
            depth=config.text_depth,
            width=config.text_width,
            heads=config.text_heads,
            context_length=config.context_length,
        )
        self.image_proj = ProjectionHead(config.image_width, config.embed_dim, config.proj_depth)
        self.text_proj = ProjectionHead(config.text_width, config.embed_dim, config.proj_depth)

    def encode_image(self, images: torch.Tensor) -> list[torch.Tensor]:
        return self.image_encoder(images)

    def encode_text(self, ids: torch.Tensor) -> list[torch.Tensor]:
        return self.text_encoder(ids)

    def embed_image(self, images: torch.Tensor) -> torch.Tensor:
        features = self.image_encoder(images)
        return self.image_proj(self.image_encoder.pool_cls(features))

    def embed_text(self, ids: torch.Tensor, eos_positions: torch.Tensor) -> torch.Tensor:
        features = self.text_encoder(ids)
        return self.text_proj(self.text_encoder.pool_eos(features, eos_positions))

    def resize_image_resolution(self, new_size: int) -> None:
        """Switch to a finer input resolution, resampling learned positions."""
        enc = self.image_encoder
        if new_size == enc.image_size:
            return
        if new_size % enc.patch_size != 0:
            raise InputError(f"{new_size} not divisible by patch {enc.patch_size}")
        target_grid = new_size // enc.patch_size
        with torch.no_grad():
            table = interpolate_pos_embeddings(enc.pos_embedding.data, target_grid)
        enc.pos_embedding = nn.Parameter(table)
        enc.image_size = new_size
        enc.grid = target_grid
        enc.num_patches = target_grid * target_grid
        self.config = replace(self.config, image_size=new_size)


def build_miniature(vocab_size: int, image_size: int = 32, patch_size: int = 16) -> VisualLinguisticModel:
    """Small double-width-64 model for property and gradient tests."""
    config = ModelConfig(
        image_depth=2,
        image_width=64,
        image_heads=4,
        patch_size=patch_size,
        image_size=image_size,
        text_depth=2,
        text_width=64,
        text_heads=4,
        context_length=77,
        vocab_size=vocab_size,
        embed_dim=64,
        proj_depth=1,
    )
    return VisualLinguisticModel(config)
