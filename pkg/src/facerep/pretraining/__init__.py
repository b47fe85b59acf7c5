"""Pre-training objectives: image-text contrast and masked patch prediction."""

from facerep.pretraining.losses import TemperatureParam, itc_loss, itc_total
from facerep.pretraining.masking import (
    MAX_MASKED,
    MaskSet,
    apply_mask,
    sample_mask,
)
from facerep.pretraining.visual_tokenizer import ColorGridTokenizer
from facerep.pretraining.mim import MaskedPatchHead, mim_forward_loss
from facerep.pretraining.schedule import ScheduleConfig, lr_at_step
from facerep.pretraining.trainer import LossRecord, Pretrainer

__all__ = [
    "ColorGridTokenizer",
    "LossRecord",
    "MAX_MASKED",
    "MaskSet",
    "MaskedPatchHead",
    "Pretrainer",
    "ScheduleConfig",
    "TemperatureParam",
    "apply_mask",
    "itc_loss",
    "itc_total",
    "lr_at_step",
    "mim_forward_loss",
    "sample_mask",
]
