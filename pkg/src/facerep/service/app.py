"""FastAPI application exposing each command as a JSON endpoint.

Errors map to a stable envelope: ``config`` and ``input`` problems return
400, numerical failures and unexpected runtime errors return 500.  The CLI
translates the ``code`` field into its exit status.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

import facerep
from facerep import workflows
from facerep.config import RunConfig, apply_overrides, build_config, load_config
from facerep.errors import (
    ConfigError,
    FacerepError,
    InputError,
    NumericalError,
)
from facerep.metrics.report import format_report
from facerep.service import schemas


def _error_payload(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


def _classify(exc: FacerepError) -> tuple[str, int]:
    if isinstance(exc, ConfigError):
        return "config", 400
    if isinstance(exc, InputError):
        return "input", 400
    if isinstance(exc, NumericalError):
        return "numerical", 500
    return "runtime", 500


def resolve_config(source: schemas.ConfigSource) -> RunConfig:
    """Materialize the run configuration a request describes."""
    if source.config is not None and source.config_path is not None:
        raise ConfigError("give either config_path or an inline config, not both")
    if source.config is not None:
        base = build_config(source.config, source="<request>")
    elif source.config_path is not None:
        base = load_config(source.config_path)
    else:
        base = RunConfig()
    return apply_overrides(
        base,
        seed=source.seed,
        deterministic=source.deterministic,
        toggles=source.toggles,
        resolution=source.resolution,
        fraction=source.fraction,
        layers=source.layers,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="facerep", version=facerep.__version__)

    @app.exception_handler(FacerepError)
    async def handle_known(request: Request, exc: FacerepError):
        code, status = _classify(exc)
        return JSONResponse(status_code=status, content=_error_payload(code, str(exc)))

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content=_error_payload("config", str(exc))
        )

    @app.exception_handler(Exception)
    async def handle_unexpected(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500,
            content=_error_payload("runtime", f"{type(exc).__name__}: {exc}"),
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": facerep.__version__}

    @app.post("/v1/curate", response_model=schemas.CurateResponse)
    def curate(req: schemas.CurateRequest):
        return workflows.run_curate(
            req.input_manifest,
            req.output_manifest,
            req.target_size,
            req.seed,
            req.threshold,
            rejects=req.rejects,
        )

    @app.post("/v1/pretrain", response_model=schemas.PretrainResponse)
    def pretrain(req: schemas.PretrainRequest):
        config = resolve_config(req.source)
        return workflows.run_pretrain(
            config,
            req.manifest,
            req.images_dir,
            req.steps,
            req.checkpoint_out,
            log_out=req.log_out,
            report_out=req.report_out,
        )

    @app.post("/v1/probe", response_model=schemas.HeadTrainResponse)
    def probe(req: schemas.HeadTrainRequest):
        config = resolve_config(req.source)
        return workflows.run_head_training(
            config,
            req.task,
            req.checkpoint,
            req.images_dir,
            req.targets,
            req.head_out,
            finetune=False,
            epochs=req.epochs,
            report_out=req.report_out,
        )

    @app.post("/v1/finetune", response_model=schemas.HeadTrainResponse)
    def finetune(req: schemas.HeadTrainRequest):
        config = resolve_config(req.source)
        return workflows.run_head_training(
            config,
            req.task,
            req.checkpoint,
            req.images_dir,
            req.targets,
            req.head_out,
            finetune=True,
            epochs=req.epochs,
            report_out=req.report_out,
        )

    @app.post("/v1/predict", response_model=schemas.PredictResponse)
    def predict(req: schemas.PredictRequest):
        config = resolve_config(req.source)
        return workflows.run_predict(
            config, req.task, req.checkpoint, req.head_checkpoint, req.images_dir, req.out_dir
        )

    @app.post("/v1/eval", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest):
        report = workflows.run_eval(
            req.task,
            req.predictions,
            req.ground_truth,
            normalizer=req.normalizer,
            threshold=req.threshold,
            eye_indices=req.eye_indices,
            groups=req.groups,
            reference=req.reference,
        )
        return {"metrics": report.to_dict(), "text": format_report(report)}

    @app.post("/v1/fewshot", response_model=schemas.FewshotResponse)
    def fewshot(req: schemas.FewshotRequest):
        return workflows.run_fewshot(
            req.manifest, req.fraction, req.seed, req.output_manifest
        )

    @app.post("/v1/gradcam", response_model=schemas.GradcamResponse)
    def gradcam_endpoint(req: schemas.GradcamRequest):
        config = resolve_config(req.source)
        return workflows.run_gradcam(
            config,
            req.image,
            req.text,
            req.grid_out,
            req.overlay_out,
            checkpoint=req.checkpoint,
        )

    @app.post("/v1/report", response_model=schemas.ReportResponse)
    def report(req: schemas.ReportRequest):
        return workflows.run_report(req.runs, req.output)

    return app


app = create_app()
