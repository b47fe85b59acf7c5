"""Warmup-then-cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

from facerep.errors import InputError


@dataclass(frozen=True)
class ScheduleConfig:
    lr_init: float = 1e-6
    lr_peak: float = 1e-3
    lr_final: float = 9e-4
    warmup_epochs: int = 1
    total_epochs: int = 16
    weight_decay: float = 0.05
    grad_clip_norm: float = 1.0
    batch_size: int = 8

    def __post_init__(self):
        for name in ("lr_init", "lr_peak", "lr_final", "grad_clip_norm"):
            if getattr(self, name) <= 0:
                raise InputError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise InputError("weight_decay must be non-negative")
        if not self.lr_init < self.lr_peak:
            raise InputError("lr_init must be below lr_peak")
        if self.lr_final > self.lr_peak:
            raise InputError("lr_final cannot exceed lr_peak")
        if not (0 < self.warmup_epochs < self.total_epochs):
            raise InputError("need 0 < warmup_epochs < total_epochs")
        if self.batch_size < 1:
            raise InputError("batch_size must be positive")


def lr_at_step(step: int, steps_per_epoch: int, cfg: ScheduleConfig) -> float:
    """Linear warmup to the peak, cosine decay to the final rate, then flat."""
    if step < 0:
        raise InputError("step must be non-negative")
    if steps_per_epoch < 1:
        raise InputError("steps_per_epoch must be positive")
    warm = cfg.warmup_epochs * steps_per_epoch
    total = cfg.total_epochs * steps_per_epoch
    if step < warm:
        return cfg.lr_init + (cfg.lr_peak - cfg.lr_init) * (step / warm)
    progress = min(1.0, (step - warm) / (total - warm))
    return cfg.lr_final + (cfg.lr_peak - cfg.lr_final) * (1.0 + math.cos(math.pi * progress)) / 2.0
