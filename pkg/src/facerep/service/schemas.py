"""Request and response bodies for the command service.

Commands operate on filesystem paths because the service and its clients
share a machine; responses return summaries plus the artifact paths written.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict


class StrictRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ConfigSource(StrictRequest):
    """Where the run configuration comes from, plus CLI-style overrides."""

    config_path: str | None = None
    config: dict | None = None
    seed: int | None = None
    deterministic: bool | None = None
    toggles: str | None = None
    resolution: int | None = None
    fraction: float | None = None
    layers: list[int] | None = None


class CurateRequest(StrictRequest):
    input_manifest: str
    output_manifest: str
    target_size: int
    seed: int = 0
    threshold: float = 0.9
    rejects: str | None = None


class CurateResponse(BaseModel):
    output_manifest: str
    read: int
    kept: int
    below_threshold: int
    rejected: dict[str, int]


class PretrainRequest(StrictRequest):
    source: ConfigSource = ConfigSource()
    manifest: str
    images_dir: str
    steps: int
    checkpoint_out: str
    log_out: str | None = None
    report_out: str | None = None


class PretrainResponse(BaseModel):
    checkpoint: str
    checkpoint_sha256: str
    steps: int
    first_loss: float
    final_loss: float
    log: str | None
    report: str


class HeadTrainRequest(StrictRequest):
    source: ConfigSource = ConfigSource()
    task: str
    checkpoint: str
    images_dir: str
    targets: str
    head_out: str
    epochs: int | None = None
    report_out: str | None = None


class HeadTrainResponse(BaseModel):
    head_checkpoint: str
    head_sha256: str
    task: str
    steps: int
    first_loss: float
    last_loss: float
    backbone_fingerprint_before: str
    backbone_fingerprint_after: str
    metrics: dict
    report: str


class PredictRequest(StrictRequest):
    source: ConfigSource = ConfigSource()
    task: str
    checkpoint: str
    head_checkpoint: str
    images_dir: str
    out_dir: str


class PredictResponse(BaseModel):
    task: str
    outputs: list[str]
    count: int


class EvalRequest(StrictRequest):
    task: str
    predictions: str
    ground_truth: str
    normalizer: str = "diag"
    threshold: float = 0.1
    eye_indices: tuple[int, int] | None = None
    groups: dict[str, list[str]] | None = None
    reference: str | None = None


class EvalResponse(BaseModel):
    metrics: dict
    text: str


class FewshotRequest(StrictRequest):
    manifest: str
    fraction: float
    seed: int = 0
    output_manifest: str


class FewshotResponse(BaseModel):
    output_manifest: str
    parent_count: int
    count: int


class GradcamRequest(StrictRequest):
    source: ConfigSource = ConfigSource()
    image: str
    text: str
    grid_out: str
    overlay_out: str
    checkpoint: str | None = None


class GradcamResponse(BaseModel):
    grid: str
    overlay: str
    degenerate: bool
    shape: list[int]


class ReportRequest(StrictRequest):
    runs: list[str]
    output: str | None = None


class ReportResponse(BaseModel):
    text: str
    runs: int
    output: str | None


class ErrorBody(BaseModel):
    code: str
    message: str


class ErrorEnvelope(BaseModel):
    error: ErrorBody
