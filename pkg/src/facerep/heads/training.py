"""Head training loops for linear/dense probing and full fine-tuning.

Probing freezes the backbone: features are computed under ``no_grad`` and a
parameter fingerprint taken before training must match the one after.
Fine-tuning optimizes backbone and head jointly at the same learning rate.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass

import torch
from torch import nn

from facerep.checkpoint import parameter_fingerprint
from facerep.encoders.vit import ImageEncoder
from facerep.errors import ConfigError, NumericalError, RuntimeFailure


@dataclass(frozen=True)
class HeadTrainConfig:
    """Optimizer settings for one task head."""

    lr: float
    weight_decay: float
    epochs: int = 100
    schedule: str = "constant"

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight decay must be >= 0, got {self.weight_decay}")
        if self.epochs <= 0:
            raise ConfigError(f"epochs must be positive, got {self.epochs}")
        if self.schedule not in ("constant", "cosine"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")

    def lr_at(self, step: int, total_steps: int) -> float:
        if self.schedule == "constant":
            return self.lr
        progress = min(max(step / max(total_steps, 1), 0.0), 1.0)
        return self.lr * (1.0 + math.cos(math.pi * progress)) / 2.0


PARSING_TRAIN = HeadTrainConfig(lr=1e-3, weight_decay=1e-5)
ALIGNMENT_TRAIN = HeadTrainConfig(lr=1e-2, weight_decay=1e-5)
ATTRIBUTE_TRAIN = HeadTrainConfig(lr=0.3, weight_decay=0.0, schedule="cosine")


def backbone_features(
    encoder: ImageEncoder, images: torch.Tensor, frozen: bool
) -> list[torch.Tensor]:
    """Per-layer features; detached when the backbone is frozen."""
    if frozen:
        with torch.no_grad():
            return encoder(images)
    return encoder(images)


@dataclass
class HeadTrainResult:
    steps: int
    losses: list[float]
    final_lr: float

    @property
    def first_loss(self) -> float:
        return self.losses[0]

    @property
    def last_loss(self) -> float:
        return self.losses[-1]


def train_head(
    encoder: ImageEncoder,
    head: nn.Module,
    batches: Iterable[tuple[torch.Tensor, torch.Tensor]],
    loss_fn: Callable[[torch.Tensor, torch.Tensor], torch.Tensor],
    config: HeadTrainConfig,
    total_steps: int,
    finetune: bool = False,
) -> HeadTrainResult:
    """Run head optimization over ``batches`` of (images, targets).

    ``total_steps`` sizes the cosine schedule; the loop itself consumes
    ``batches`` until exhaustion.  With ``finetune`` unset the backbone is
    left untouched, which is verified against a parameter fingerprint.
    """
    params: list[nn.Parameter] = list(head.parameters())
    if finetune:
        params += list(encoder.parameters())
        encoder.train()
    else:
        encoder.eval()
        before = parameter_fingerprint(encoder)
    head.train()
    optimizer = torch.optim.AdamW(
        params, lr=config.lr, weight_decay=config.weight_decay
    )
    losses: list[float] = []
    lr = config.lr
    for step, (images, targets) in enumerate(batches):
        lr = config.lr_at(step, total_steps)
        for group in optimizer.param_groups:
            group["lr"] = lr
        features = backbone_features(encoder, images, frozen=not finetune)
        loss = loss_fn(head(features), targets)
        if not torch.isfinite(loss):
            raise NumericalError(f"non-finite head loss at step {step}")
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))
    if not losses:
        raise ConfigError("no training batches supplied")
    if not finetune:
        after = parameter_fingerprint(encoder)
        if after != before:
            raise RuntimeFailure("backbone parameters changed during probing")
    return HeadTrainResult(steps=len(losses), losses=losses, final_lr=lr)


def repeat_batches(
    images: torch.Tensor, targets: torch.Tensor, steps: int
) -> Iterable[tuple[torch.Tensor, torch.Tensor]]:
    """Present the same full batch for a fixed number of steps."""
    for _ in range(steps):
        yield images, targets


def epoch_batches(
    images: torch.Tensor,
    targets: torch.Tensor,
    batch_size: int,
    epochs: int,
    generator: torch.Generator | None = None,
) -> Iterable[tuple[torch.Tensor, torch.Tensor]]:
    """Shuffled minibatches over a fixed in-memory dataset."""
    n = images.shape[0]
    if targets.shape[0] != n:
        raise ConfigError(f"images ({n}) and targets ({targets.shape[0]}) disagree")
    for _ in range(epochs):
        order = torch.randperm(n, generator=generator)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            yield images[idx], targets[idx]


def count_steps(n: int, batch_size: int, epochs: int) -> int:
    return epochs * math.ceil(n / batch_size)
