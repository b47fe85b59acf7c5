"""Image and text Transformer towers plus metric projection heads."""

from facerep.encoders.vit import Block, ImageEncoder, interpolate_pos_embeddings
from facerep.encoders.text import TextEncoder
from facerep.encoders.model import (
    ModelConfig,
    ProjectionHead,
    VisualLinguisticModel,
    build_miniature,
)
from facerep.encoders.tokenizer import TextTokenizer, TextTokens

__all__ = [
    "Block",
    "ImageEncoder",
    "ModelConfig",
    "ProjectionHead",
    "TextEncoder",
    "TextTokenizer",
    "TextTokens",
    "VisualLinguisticModel",
    "build_miniature",
    "interpolate_pos_embeddings",
]
