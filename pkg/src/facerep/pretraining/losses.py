"""Symmetric image-text contrastive loss with a learnable temperature."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from facerep.errors import InputError, NumericalError


class TemperatureParam(nn.Module):
    """Holds the temperature as log sigma so sigma stays positive."""

    def __init__(self, init_sigma: float = 0.07):
        super().__init__()
        if init_sigma <= 0:
            raise InputError("initial temperature must be positive")
        self.log_sigma = nn.Parameter(torch.tensor(math.log(init_sigma), dtype=torch.float32))

    @property
    def sigma(self) -> torch.Tensor:
        return self.log_sigma.exp()


def _check_embeddings(embs: torch.Tensor, name: str) -> None:
    if embs.ndim != 2:
        raise InputError(f"{name} must be (B, D), got {tuple(embs.shape)}")
    if embs.shape[0] < 1:
        raise InputError(f"{name} batch is empty")
    norms = embs.detach().norm(dim=-1)
    if not torch.allclose(norms, torch.ones_like(norms), atol=1e-4):
        raise InputError(f"{name} rows must be unit-normalized")


def itc_loss(
    image_embs: torch.Tensor,
    text_embs: torch.Tensor,
    temperature: TemperatureParam,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Both directions of the paired-batch contrastive loss.

    Row i of the logit matrix scores image i against every text; the image
    loss is the mean NLL of the matching diagonal entry, and the text loss
    is the same over columns. Logits are similarities divided by sigma.
    """
    _check_embeddings(image_embs, "image_embs")
    _check_embeddings(text_embs, "text_embs")
    if image_embs.shape != text_embs.shape:
        raise InputError(
            f"embedding shapes differ: {tuple(image_embs.shape)} vs {tuple(text_embs.shape)}"
        )
    sigma = temperature.sigma.to(image_embs.dtype)
    logits = image_embs @ text_embs.T / sigma
    if not torch.all(torch.isfinite(logits)):
        raise NumericalError("non-finite contrastive logits")
    labels = torch.arange(logits.shape[0], device=logits.device)
    loss_image = F.cross_entropy(logits, labels)
    loss_text = F.cross_entropy(logits.T, labels)
    return loss_image, loss_text


def itc_total(loss_image: torch.Tensor, loss_text: torch.Tensor) -> torch.Tensor:
    return (loss_image + loss_text) / 2
