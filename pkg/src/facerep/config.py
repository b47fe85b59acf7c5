"""Structured run configuration: schema, toggles, YAML loading.

One schema drives every command.  Sections mirror the runtime dataclasses
field for field, unknown keys are rejected, and a parsed tree serializes back
to YAML that parses to an identical tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import yaml
from pydantic import (
    BaseModel,
    ConfigDict,
    ValidationError,
    field_validator,
    model_validator,
)

from facerep.encoders.model import ModelConfig
from facerep.errors import ConfigError
from facerep.geometry.warp import WarpConfig
from facerep.heads.training import HeadTrainConfig
from facerep.pretraining.schedule import ScheduleConfig

_TOGGLE_NAMES = ("ITC", "MIM1", "MIM6", "ALIGN")


@dataclass(frozen=True)
class Toggles:
    """Pre-training variant switches; the contrastive term is mandatory."""

    mim_depth: int = 0
    align: bool = False

    def __post_init__(self) -> None:
        if self.mim_depth not in (0, 1, 6):
            raise ConfigError(f"mim depth must be 0, 1, or 6, got {self.mim_depth}")

    @property
    def mim(self) -> bool:
        return self.mim_depth > 0

    def label(self) -> str:
        parts = ["ITC"]
        if self.mim_depth:
            parts.append(f"MIM{self.mim_depth}")
        if self.align:
            parts.append("ALIGN")
        return ",".join(parts)


def parse_toggles(text: str) -> Toggles:
    """Parse a comma-separated toggle list such as ``ITC,MIM1,ALIGN``."""
    names = [part.strip().upper() for part in text.split(",") if part.strip()]
    if not names:
        raise ConfigError("toggle list is empty")
    unknown = [n for n in names if n not in _TOGGLE_NAMES]
    if unknown:
        raise ConfigError(
            f"unknown toggle(s) {unknown}; valid names: {', '.join(_TOGGLE_NAMES)}"
        )
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate toggles in {text!r}")
    if "ITC" not in names:
        raise ConfigError("the ITC toggle is required")
    if "MIM1" in names and "MIM6" in names:
        raise ConfigError("MIM1 and MIM6 are mutually exclusive")
    depth = 1 if "MIM1" in names else 6 if "MIM6" in names else 0
    return Toggles(mim_depth=depth, align="ALIGN" in names)


class StrictSection(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(StrictSection):
    """Mirror of the encoder dimensions; text vocabulary comes from the tokenizer."""

    image_depth: int = 12
    image_width: int = 768
    image_heads: int = 12
    patch_size: int = 16
    image_size: int = 224
    text_depth: int = 12
    text_width: int = 512
    text_heads: int = 8
    context_length: int = 77
    embed_dim: int = 512
    proj_depth: int = 1

    def to_model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, **self.model_dump())


class ScheduleSection(StrictSection):
    lr_init: float = 1e-6
    lr_peak: float = 1e-3
    lr_final: float = 9e-4
    warmup_epochs: int = 1
    total_epochs: int = 16
    weight_decay: float = 0.05
    grad_clip_norm: float = 1.0
    batch_size: int = 8

    def to_schedule(self) -> ScheduleConfig:
        return ScheduleConfig(**self.model_dump())


class WarpSection(StrictSection):
    enabled: bool = False
    alpha: float = 0.8

    def to_warp(self) -> WarpConfig:
        return WarpConfig(enabled=self.enabled, alpha=self.alpha)


class HeadSection(StrictSection):
    lr: float
    weight_decay: float
    epochs: int = 100
    schedule: Literal["constant", "cosine"] = "constant"

    def to_train_config(self) -> HeadTrainConfig:
        return HeadTrainConfig(**self.model_dump())


class HeadsSection(StrictSection):
    parsing: HeadSection = HeadSection(lr=1e-3, weight_decay=1e-5)
    alignment: HeadSection = HeadSection(lr=1e-2, weight_decay=1e-5)
    attributes: HeadSection = HeadSection(lr=0.3, weight_decay=0.0, schedule="cosine")


class DataSection(StrictSection):
    manifest: str | None = None
    images_dir: str | None = None
    output_dir: str = "runs"
    face_score_threshold: float = 0.9
    face_ratio: float = 1.0
    fewshot_fraction: float | None = None

    @field_validator("face_score_threshold", "face_ratio")
    @classmethod
    def _unit_interval(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"must lie in [0, 1], got {v}")
        return v

    @field_validator("fewshot_fraction")
    @classmethod
    def _valid_fraction(cls, v: float | None) -> float | None:
        if v is not None and not 0.0 < v <= 1.0:
            raise ValueError(f"must lie in (0, 1], got {v}")
        return v


class RunConfig(StrictSection):
    seed: int = 0
    deterministic: bool = False
    resolution: int | None = None
    toggles: str = "ITC,MIM1,ALIGN"
    layers: list[int] = [4, 6, 8, 12]
    mim_vocab: int = 512
    mim_weight: float = 1.0
    model: ModelSection = ModelSection()
    schedule: ScheduleSection = ScheduleSection()
    warp: WarpSection = WarpSection()
    heads: HeadsSection = HeadsSection()
    data: DataSection = DataSection()

    @field_validator("resolution")
    @classmethod
    def _known_resolution(cls, v: int | None) -> int | None:
        if v is not None and v not in (224, 448):
            raise ValueError(f"resolution must be 224 or 448, got {v}")
        return v

    @field_validator("toggles")
    @classmethod
    def _canonical_toggles(cls, v: str) -> str:
        try:
            return parse_toggles(v).label()
        except ConfigError as exc:
            raise ValueError(str(exc)) from exc

    @field_validator("mim_vocab")
    @classmethod
    def _positive_vocab(cls, v: int) -> int:
        if v < 2:
            raise ValueError(f"mim_vocab must be at least 2, got {v}")
        return v

    @field_validator("layers")
    @classmethod
    def _valid_layers(cls, v: list[int]) -> list[int]:
        from facerep.heads.fusion import validate_tap_layers

        try:
            return list(validate_tap_layers(v))
        except ConfigError as exc:
            raise ValueError(str(exc)) from exc

    @model_validator(mode="after")
    def _layers_within_depth(self) -> "RunConfig":
        if max(self.layers) > self.model.image_depth:
            raise ValueError(
                f"tap layer {max(self.layers)} exceeds image depth "
                f"{self.model.image_depth}"
            )
        return self

    def parsed_toggles(self) -> Toggles:
        return parse_toggles(self.toggles)


def load_config(path) -> RunConfig:
    """Read a YAML file into a validated RunConfig."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    return build_config(raw, source=str(path))


def build_config(raw: object, source: str = "<inline>") -> RunConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        lines = [
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}"
            for err in exc.errors()
        ]
        raise ConfigError(f"{source}: invalid config\n  " + "\n  ".join(lines)) from exc


def save_config(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config.model_dump(), fh, sort_keys=False)


def apply_overrides(
    config: RunConfig,
    seed: int | None = None,
    deterministic: bool | None = None,
    toggles: str | None = None,
    resolution: int | None = None,
    fraction: float | None = None,
    layers: list[int] | None = None,
) -> RunConfig:
    """Fold command-line overrides into a fresh validated config."""
    tree = config.model_dump()
    if seed is not None:
        tree["seed"] = seed
    if deterministic is not None:
        tree["deterministic"] = deterministic
    if toggles is not None:
        tree["toggles"] = toggles
    if resolution is not None:
        tree["resolution"] = resolution
    if fraction is not None:
        tree["data"]["fewshot_fraction"] = fraction
    if layers is not None:
        tree["layers"] = layers
    return build_config(tree, source="<overrides>")
