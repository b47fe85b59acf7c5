"""Grad-CAM over the image tower, conditioned on a text query.

The scalar objective is the similarity between the projected image and text
embeddings.  Gradients are taken at the output of the first normalization
inside the final image transformer block; channel weights are the gradient
averaged over patch tokens, and the weighted activation sum over patch tokens
gives the raw map, which is rectified and min-max normalized onto the patch
grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from facerep.data.images import save_image
from facerep.encoders.model import VisualLinguisticModel
from facerep.encoders.tokenizer import TextTokenizer
from facerep.errors import InputError

_FLAT_SPAN = 1e-12


@dataclass(frozen=True)
class SaliencyMap:
    """Patch-grid saliency in [0, 1]; all-zero when flagged degenerate."""

    values: np.ndarray
    degenerate: bool

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise InputError(f"saliency grid must be square, got {values.shape}")
        if self.degenerate:
            if values.any():
                raise InputError("degenerate saliency must be all-zero")
        elif float(values.min()) < 0.0 or float(values.max()) > 1.0:
            raise InputError("saliency values must lie in [0, 1]")
        object.__setattr__(self, "values", values)


def staged_image_forward(
    model: VisualLinguisticModel, images: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Image embedding plus the tapped activation it was computed from.

    The returned activation is the first-normalization output of the last
    block and stays connected to the embedding in the autograd graph.
    """
    enc = model.image_encoder
    tokens = enc.embed_tokens(images)
    x = tokens + enc.pos_embedding.to(tokens.dtype)
    for block in enc.blocks[:-1]:
        x = block(x)
    last = enc.blocks[-1]
    normed = last.ln_1(x)
    out = last.finish(x, normed)
    embedding = model.image_proj(enc.ln_post(out[:, 0]))
    return embedding, normed


def gradcam(
    model: VisualLinguisticModel,
    image: torch.Tensor,
    text: str,
    tokenizer: TextTokenizer | None = None,
) -> SaliencyMap:
    if not text or not text.strip():
        raise InputError("text query must be non-empty")
    if image.ndim == 3:
        image = image[None]
    if image.ndim != 4 or image.shape[0] != 1:
        raise InputError(f"expected one (3, H, W) image, got shape {tuple(image.shape)}")
    tokenizer = tokenizer or TextTokenizer()
    tokens = tokenizer.tokenize(text)
    ids = torch.from_numpy(tokens.ids)[None]
    eos = torch.tensor([tokens.eos_position])
    with torch.no_grad():
        text_embed = model.embed_text(ids, eos)
    image_embed, normed = staged_image_forward(model, image)
    score = (image_embed * text_embed).sum()
    (grad,) = torch.autograd.grad(score, normed)
    weights = grad[:, 1:, :].mean(dim=1)
    cam = (normed.detach()[:, 1:, :] * weights[:, None, :]).sum(dim=-1)
    cam = torch.clamp(cam, min=0.0)
    grid = model.image_encoder.grid
    raw = cam.reshape(grid, grid).double().numpy()
    span = float(raw.max() - raw.min())
    if span < _FLAT_SPAN:
        return SaliencyMap(values=np.zeros((grid, grid)), degenerate=True)
    return SaliencyMap(values=(raw - raw.min()) / span, degenerate=False)


def save_saliency_grid(path, saliency: SaliencyMap) -> None:
    """Write the raw grid as a plain text matrix."""
    np.savetxt(path, saliency.values, fmt="%.6f")


def save_overlay(path, saliency: SaliencyMap, image: torch.Tensor) -> None:
    """Blend saliency over the input as a red tint and save losslessly."""
    if image.ndim == 4:
        image = image[0]
    if image.ndim != 3 or image.shape[0] != 3:
        raise InputError(f"expected a (3, H, W) image, got shape {tuple(image.shape)}")
    h, w = int(image.shape[1]), int(image.shape[2])
    heat = torch.from_numpy(saliency.values)[None, None]
    heat = torch.nn.functional.interpolate(
        heat, size=(h, w), mode="bilinear", align_corners=False
    )[0, 0]
    rgb = image.detach().double().permute(1, 2, 0).numpy().copy()
    alpha = 0.5 * heat.numpy()
    rgb *= 1.0 - alpha[:, :, None]
    rgb[:, :, 0] += alpha
    save_image(path, np.clip(rgb, 0.0, 1.0))
