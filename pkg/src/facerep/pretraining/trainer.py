"""Single-writer pre-training loop over a two-tower model."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import torch

from facerep.errors import InputError, NumericalError
from facerep.encoders.model import VisualLinguisticModel
from facerep.pretraining.losses import TemperatureParam, itc_loss, itc_total
from facerep.pretraining.masking import MAX_MASKED, apply_mask, sample_mask
from facerep.pretraining.mim import MaskedPatchHead
from facerep.pretraining.schedule import ScheduleConfig, lr_at_step
from facerep.pretraining.visual_tokenizer import ColorGridTokenizer


@dataclass
class LossRecord:
    step: int
    lr: float
    loss_itc_image: float
    loss_itc_text: float
    loss_mim: float | None
    loss_total: float
    grad_norm: float
    sigma: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


class Pretrainer:
    """Owns the optimizer and per-step bookkeeping.

    The contrastive term always receives the full logical batch; callers
    running data-parallel must gather embeddings before stepping. The MIM
    term runs a second, masked forward over the same crops when a head is
    attached.
    """

    def __init__(
        self,
        model: VisualLinguisticModel,
        temperature: TemperatureParam,
        schedule: ScheduleConfig,
        steps_per_epoch: int,
        mim_head: MaskedPatchHead | None = None,
        visual_tokenizer: ColorGridTokenizer | None = None,
        seed: int = 0,
        mim_weight: float = 1.0,
        betas: tuple[float, float] = (0.9, 0.999),
    ):
        if steps_per_epoch < 1:
            raise InputError("steps_per_epoch must be positive")
        if (mim_head is None) != (visual_tokenizer is None):
            raise InputError("mim_head and visual_tokenizer must be provided together")
        if mim_head is not None and visual_tokenizer.vocab_size != mim_head.vocab_size:
            raise InputError(
                f"tokenizer vocabulary {visual_tokenizer.vocab_size} differs from "
                f"head vocabulary {mim_head.vocab_size}"
            )
        self.model = model
        self.temperature = temperature
        self.schedule = schedule
        self.steps_per_epoch = steps_per_epoch
        self.mim_head = mim_head
        self.visual_tokenizer = visual_tokenizer
        self.mim_weight = mim_weight
        self.mask_rng = np.random.default_rng(seed)
        self.global_step = 0
        self.records: list[LossRecord] = []
        params = list(model.parameters()) + list(temperature.parameters())
        if mim_head is not None:
            params += list(mim_head.parameters())
        self._params = params
        self.optimizer = torch.optim.AdamW(
            params,
            lr=schedule.lr_init,
            betas=betas,
            weight_decay=schedule.weight_decay,
        )

    def _mim_term(self, images: torch.Tensor) -> torch.Tensor:
        encoder = self.model.image_encoder
        targets = self.visual_tokenizer.tokenize(images)
        mask = sample_mask(
            encoder.num_patches,
            min(MAX_MASKED, encoder.num_patches),
            self.mask_rng,
        )
        tokens = encoder.embed_tokens(images)
        masked = apply_mask(tokens, mask, self.mim_head.mask_token)
        features = encoder.encode_tokens(masked)
        return self.mim_head.loss(features[-1], mask, targets)

    def step(
        self,
        images: torch.Tensor,
        ids: torch.Tensor,
        eos_positions: torch.Tensor,
        batch_id: str | None = None,
    ) -> LossRecord:
        lr = lr_at_step(self.global_step, self.steps_per_epoch, self.schedule)
        for group in self.optimizer.param_groups:
            group["lr"] = lr

        image_embs = self.model.embed_image(images)
        text_embs = self.model.embed_text(ids, eos_positions)
        loss_image, loss_text = itc_loss(image_embs, text_embs, self.temperature)
        total = itc_total(loss_image, loss_text)
        mim_value = None
        if self.mim_head is not None:
            mim = self._mim_term(images)
            total = total + self.mim_weight * mim
            mim_value = float(mim.detach())

        if not torch.isfinite(total):
            tag = f" (batch {batch_id})" if batch_id else ""
            raise NumericalError(
                f"non-finite loss at step {self.global_step}{tag}; update aborted"
            )

        self.optimizer.zero_grad(set_to_none=True)
        total.backward()
        grad_norm = torch.nn.utils.clip_grad_norm_(
            self._params, self.schedule.grad_clip_norm
        )
        self.optimizer.step()

        record = LossRecord(
            step=self.global_step,
            lr=lr,
            loss_itc_image=float(loss_image.detach()),
            loss_itc_text=float(loss_text.detach()),
            loss_mim=mim_value,
            loss_total=float(total.detach()),
            grad_norm=float(grad_norm),
            sigma=float(self.temperature.sigma.detach()),
        )
        self.records.append(record)
        self.global_step += 1
        return record

    def write_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.records:
                fh.write(record.to_json() + "\n")
