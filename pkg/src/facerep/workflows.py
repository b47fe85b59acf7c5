"""Command orchestration shared by the HTTP service and the CLI.

Each function here is one user-facing command: it assembles inputs from
files, drives the core modules, writes artifacts, and returns a JSON-ready
summary including a RunReport.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import torch

from facerep.checkpoint import (
    load_checkpoint,
    load_into,
    parameter_fingerprint,
    save_checkpoint,
    state_tensors,
)
from facerep.config import RunConfig, Toggles, build_config
from facerep.data.curate import curate_manifest
from facerep.data.manifest import read_manifest, write_manifest
from facerep.data.sampling import DatasetSplit, fewshot_subset
from facerep.encoders.model import VisualLinguisticModel
from facerep.encoders.tokenizer import TextTokenizer
from facerep.errors import ConfigError, InputError, RuntimeFailure
from facerep.geometry.heatmap import decode_heatmap, render_heatmap
from facerep.geometry.landmarks import load_landmarks, save_landmarks
from facerep.data.images import load_image, load_label_map, save_label_map
from facerep.heads import (
    HEATMAP_SIZE,
    AlignmentHead,
    AttributeHead,
    HeadTrainConfig,
    ParsingHead,
    attribute_loss,
    parsing_loss,
    soft_label_ce,
    train_head,
)
from facerep.metrics.attributes import group_discrepancy, mean_accuracy
from facerep.metrics.landmarks import auc_ced, failure_rate, nme
from facerep.metrics.report import MetricReport, format_report
from facerep.metrics.segmentation import ConfusionAccumulator
from facerep.preprocess import batch_tensor, prepare_pretrain_batch
from facerep.pretraining.losses import TemperatureParam
from facerep.pretraining.mim import MaskedPatchHead
from facerep.pretraining.trainer import Pretrainer
from facerep.pretraining.visual_tokenizer import ColorGridTokenizer
from facerep.runs import RunReport, read_report, wall_clock, write_report
from facerep.saliency import gradcam, save_overlay, save_saliency_grid

TASKS = ("parsing", "alignment", "attributes")


def seed_everything(seed: int, deterministic: bool) -> None:
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True)


def build_model(config: RunConfig, tokenizer: TextTokenizer) -> VisualLinguisticModel:
    return VisualLinguisticModel(config.model.to_model_config(tokenizer.vocab_size))


def _mim_bins(vocab: int) -> int:
    bins = round(vocab ** (1.0 / 3.0))
    if bins**3 != vocab:
        raise ConfigError(f"mim_vocab must be a perfect cube, got {vocab}")
    return bins


def build_mim(
    config: RunConfig, toggles: Toggles
) -> tuple[MaskedPatchHead | None, ColorGridTokenizer | None]:
    if not toggles.mim:
        return None, None
    head = MaskedPatchHead(
        width=config.model.image_width,
        vocab_size=config.mim_vocab,
        depth=toggles.mim_depth,
        heads=config.model.image_heads,
    )
    visual = ColorGridTokenizer(
        patch_size=config.model.patch_size, bins=_mim_bins(config.mim_vocab)
    )
    return head, visual


def _component_tensors(
    model: VisualLinguisticModel,
    temperature: TemperatureParam | None = None,
    mim_head: MaskedPatchHead | None = None,
    head: torch.nn.Module | None = None,
) -> dict:
    tensors = state_tensors(model, prefix="model.")
    if temperature is not None:
        tensors.update(state_tensors(temperature, prefix="temperature."))
    if mim_head is not None:
        tensors.update(state_tensors(mim_head, prefix="mim."))
    if head is not None:
        tensors.update(state_tensors(head, prefix="head."))
    return tensors


def load_backbone(
    checkpoint_path, config: RunConfig, tokenizer: TextTokenizer
) -> tuple[VisualLinguisticModel, RunConfig, dict]:
    """Rebuild the model a checkpoint was trained with and load its weights.

    The architecture section always comes from the checkpoint metadata;
    run-level settings (seed, tap layers, head hyperparameters) stay with
    the caller.  Tap layers that exceed the stored depth fail validation.
    """
    tensors, metadata = load_checkpoint(checkpoint_path)
    stored = metadata.get("config")
    if isinstance(stored, dict) and "model" in stored:
        tree = config.model_dump()
        tree["model"] = stored["model"]
        config = build_config(tree, source=f"{checkpoint_path} metadata")
    model = build_model(config, tokenizer)
    load_into(model, tensors, prefix="model.")
    return model, config, metadata


def _pretrain_batches(records, images_dir, size, align, batch_size, seed, tokenizer):
    rng = np.random.default_rng(seed)
    order: list[int] = []
    while True:
        if not order:
            order = list(rng.permutation(len(records)))
        take, order = order[:batch_size], order[batch_size:]
        batch = [records[i] for i in take]
        yield prepare_pretrain_batch(batch, images_dir, size, align, rng, tokenizer)


def run_pretrain(
    config: RunConfig,
    manifest,
    images_dir,
    steps: int,
    checkpoint_out,
    log_out=None,
    report_out=None,
) -> dict:
    if steps < 1:
        raise ConfigError(f"steps must be positive, got {steps}")
    seed_everything(config.seed, config.deterministic)
    tokenizer = TextTokenizer()
    model = build_model(config, tokenizer)
    toggles = config.parsed_toggles()
    mim_head, visual = build_mim(config, toggles)
    _, records = read_manifest(manifest)
    if not records:
        raise InputError(f"manifest {manifest} holds no records")
    schedule = config.schedule.to_schedule()
    steps_per_epoch = max(1, math.ceil(len(records) / schedule.batch_size))
    trainer = Pretrainer(
        model,
        TemperatureParam(),
        schedule,
        steps_per_epoch,
        mim_head=mim_head,
        visual_tokenizer=visual,
        seed=config.seed,
        mim_weight=config.mim_weight,
    )
    batches = _pretrain_batches(
        records,
        images_dir,
        config.model.image_size,
        toggles.align,
        schedule.batch_size,
        config.seed,
        tokenizer,
    )
    with wall_clock(config.deterministic) as clock:
        for step in range(steps):
            images, ids, eos = next(batches)
            trainer.step(images, ids, eos, batch_id=f"step{step}")
    metadata = {
        "kind": "pretrain",
        "toggles": toggles.label(),
        "steps": steps,
        "config": config.model_dump(),
    }
    sha = save_checkpoint(
        checkpoint_out, _component_tensors(model, trainer.temperature, mim_head), metadata
    )
    if log_out is not None:
        trainer.write_log(log_out)
    report = RunReport(
        command="pretrain",
        seed=config.seed,
        config=config.model_dump(),
        checkpoint_sha256=sha,
        metrics=None,
        wall_clock_seconds=clock["seconds"],
    )
    if report_out is not None:
        write_report(report, report_out)
    last = trainer.records[-1]
    return {
        "checkpoint": str(checkpoint_out),
        "checkpoint_sha256": sha,
        "steps": steps,
        "first_loss": trainer.records[0].loss_total,
        "final_loss": last.loss_total,
        "log": None if log_out is None else str(log_out),
        "report": report.to_json(),
    }


def _paired_stems(images_dir, other_dir, other_suffix: str) -> list[tuple[Path, Path]]:
    images = sorted(Path(images_dir).glob("*.png"))
    if not images:
        raise InputError(f"no .png images under {images_dir}")
    pairs = []
    for image_path in images:
        other = Path(other_dir) / (image_path.stem + other_suffix)
        if not other.exists():
            raise InputError(f"missing companion file {other}")
        pairs.append((image_path, other))
    return pairs


def _load_task_dataset(task: str, images_dir, targets_path, size: int):
    """Returns (images (B,3,s,s), targets, extras) for one head task."""
    if task == "parsing":
        pairs = _paired_stems(images_dir, targets_path, ".png")
        crops = [load_image(ip) for ip, _ in pairs]
        masks = [load_label_map(tp) for _, tp in pairs]
        images = batch_tensor(crops)
        targets = torch.from_numpy(np.stack(masks))
        num_classes = int(targets.max()) + 1
        return images, targets, {"num_classes": max(2, num_classes)}
    if task == "alignment":
        pairs = _paired_stems(images_dir, targets_path, ".txt")
        crops, points = [], []
        for image_path, lm_path in pairs:
            crops.append(load_image(image_path))
            faces = load_landmarks(lm_path)
            if len(faces) != 1:
                raise InputError(f"{lm_path} must hold exactly one face")
            points.append(faces[0])
        images = batch_tensor(crops)
        scale = HEATMAP_SIZE / size
        maps = [render_heatmap(p * scale, size=HEATMAP_SIZE) for p in points]
        targets = torch.from_numpy(np.stack(maps)).float()
        return images, targets, {"points": points}
    if task == "attributes":
        rows = []
        try:
            fh = open(targets_path, "r", encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read attributes {targets_path}: {exc}") from exc
        with fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise InputError(f"{targets_path}:{lineno}: {exc}") from exc
        if not rows:
            raise InputError(f"no attribute rows in {targets_path}")
        crops = [load_image(Path(images_dir) / row["image"]) for row in rows]
        try:
            labels = np.array([row["attributes"] for row in rows], dtype=np.float32)
        except ValueError as exc:
            raise InputError(f"ragged attribute rows in {targets_path}: {exc}") from exc
        if labels.ndim != 2:
            raise InputError(f"attribute rows must be equal-length lists in {targets_path}")
        return batch_tensor(crops), torch.from_numpy(labels), {"rows": rows}
    raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")


def _build_head(task: str, config: RunConfig, extras: dict, size: int):
    width = config.model.image_width
    layers = tuple(config.layers)
    if task == "parsing":
        head = ParsingHead(width, extras["num_classes"], size, layers=layers)
        return head, parsing_loss, config.heads.parsing.to_train_config()
    if task == "alignment":
        count = len(extras["points"][0])
        head = AlignmentHead(width, count, layers=layers)
        return head, soft_label_ce, config.heads.alignment.to_train_config()
    count = len(extras["rows"][0]["attributes"])
    head = AttributeHead(width, count, layers=layers)
    return head, attribute_loss, config.heads.attributes.to_train_config()


def _task_metrics(task, head, model, images, targets, extras, size) -> MetricReport:
    with torch.no_grad():
        outputs = head(model.image_encoder(images))
    if task == "parsing":
        acc = ConfusionAccumulator(extras["num_classes"])
        pred = outputs.argmax(dim=1).numpy()
        acc.update(pred, targets.numpy())
        per_class, mean = acc.per_class_f1(), acc.mean_f1()
        return MetricReport(
            per_class_f1=[None if math.isnan(v) else v for v in per_class],
            mean_f1=mean,
        )
    if task == "alignment":
        scale = size / HEATMAP_SIZE
        errors = []
        for i, gt in enumerate(extras["points"]):
            coords, _ = decode_heatmap(outputs[i].numpy(), logits=True)
            pred = coords * scale
            lo, hi = gt.min(axis=0), gt.max(axis=0)
            box = (hi[0] - lo[0], hi[1] - lo[1])
            errors.append(nme(pred, gt, normalizer="diag", box=box))
        values = np.array(errors)
        return MetricReport(
            nme={"diag": float(values.mean())},
            failure_rate={"0.1": failure_rate(values, 0.1)},
            auc={"0.1": auc_ced(values, 0.1)},
        )
    pred = (outputs > 0).numpy()
    return MetricReport(mean_attr_accuracy=mean_accuracy(pred, targets.numpy() > 0.5))


def run_head_training(
    config: RunConfig,
    task: str,
    checkpoint,
    images_dir,
    targets_path,
    head_out,
    finetune: bool,
    epochs: int | None = None,
    report_out=None,
) -> dict:
    seed_everything(config.seed, config.deterministic)
    tokenizer = TextTokenizer()
    model, config, _ = load_backbone(checkpoint, config, tokenizer)
    if finetune and config.resolution and config.resolution != model.config.image_size:
        model.resize_image_resolution(config.resolution)
    size = model.config.image_size
    images, targets, extras = _load_task_dataset(task, images_dir, targets_path, size)
    if images.shape[-1] != size:
        raise InputError(
            f"dataset images are {images.shape[-1]}px but the model takes {size}px"
        )
    head, loss_fn, train_cfg = _build_head(task, config, extras, size)
    if epochs is not None:
        if epochs < 1:
            raise ConfigError(f"epochs must be positive, got {epochs}")
        train_cfg = HeadTrainConfig(
            lr=train_cfg.lr,
            weight_decay=train_cfg.weight_decay,
            epochs=epochs,
            schedule=train_cfg.schedule,
        )
    before = parameter_fingerprint(model.image_encoder)

    def batches():
        for _ in range(train_cfg.epochs):
            yield images, targets

    with wall_clock(config.deterministic) as clock:
        result = train_head(
            model.image_encoder,
            head,
            batches(),
            loss_fn,
            train_cfg,
            total_steps=train_cfg.epochs,
            finetune=finetune,
        )
        metrics = _task_metrics(task, head, model, images, targets, extras, size)
    after = parameter_fingerprint(model.image_encoder)
    if not finetune and after != before:
        raise RuntimeFailure("frozen backbone changed during probing")
    head_meta = {
        "kind": "finetune" if finetune else "probe",
        "task": task,
        "backbone": str(checkpoint),
        "config": config.model_dump(),
    }
    tensors = state_tensors(head, prefix="head.")
    if finetune:
        tensors.update(state_tensors(model, prefix="model."))
    sha = save_checkpoint(head_out, tensors, head_meta)
    command = "finetune" if finetune else "probe"
    report = RunReport(
        command=command,
        seed=config.seed,
        config=config.model_dump(),
        checkpoint_sha256=sha,
        metrics=metrics.to_dict(),
        wall_clock_seconds=clock["seconds"],
    )
    if report_out is not None:
        write_report(report, report_out)
    return {
        "head_checkpoint": str(head_out),
        "head_sha256": sha,
        "task": task,
        "steps": result.steps,
        "first_loss": result.first_loss,
        "last_loss": result.last_loss,
        "backbone_fingerprint_before": before,
        "backbone_fingerprint_after": after,
        "metrics": metrics.to_dict(),
        "report": report.to_json(),
    }


def run_predict(
    config: RunConfig, task: str, checkpoint, head_checkpoint, images_dir, out_dir
) -> dict:
    """Write per-image predictions in the same formats eval consumes."""
    seed_everything(config.seed, config.deterministic)
    tokenizer = TextTokenizer()
    head_tensors, head_meta = load_checkpoint(head_checkpoint)
    stored = head_meta.get("config")
    if isinstance(stored, dict):
        config = build_config(stored, source=f"{head_checkpoint} metadata")
    model, config, _ = load_backbone(checkpoint, config, tokenizer)
    size = model.config.image_size
    images = sorted(Path(images_dir).glob("*.png"))
    if not images:
        raise InputError(f"no .png images under {images_dir}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    batch = batch_tensor([load_image(p) for p in images])
    width = config.model.image_width
    layers = tuple(config.layers)
    if task == "parsing":
        classes = head_tensors["head.classify.weight"].shape[0]
        head = ParsingHead(width, int(classes), size, layers=layers)
    elif task == "alignment":
        count = head_tensors["head.predict.weight"].shape[0]
        head = AlignmentHead(width, int(count), layers=layers)
    elif task == "attributes":
        count = head_tensors["head.classify.weight"].shape[0]
        head = AttributeHead(width, int(count), layers=layers)
    else:
        raise ConfigError(f"unknown task {task!r}")
    load_into(head, head_tensors, prefix="head.")
    with torch.no_grad():
        outputs = head(model.image_encoder(batch))
    written = []
    if task == "parsing":
        for path, logit in zip(images, outputs):
            pred = logit.argmax(dim=0).numpy().astype(np.int64)
            save_label_map(out_dir / path.name, pred)
            written.append(str(out_dir / path.name))
    elif task == "alignment":
        scale = size / HEATMAP_SIZE
        for path, maps in zip(images, outputs):
            coords, _ = decode_heatmap(maps.numpy(), logits=True)
            target = out_dir / (path.stem + ".txt")
            save_landmarks(target, [coords * scale])
            written.append(str(target))
    else:
        target = out_dir / "predictions.jsonl"
        with open(target, "w", encoding="utf-8") as fh:
            for path, logits in zip(images, outputs):
                row = {
                    "image": path.name,
                    "attributes": [int(v > 0) for v in logits],
                }
                fh.write(json.dumps(row) + "\n")
        written.append(str(target))
    return {"task": task, "outputs": written, "count": len(images)}


def _read_attribute_rows(path) -> dict[str, list[int]]:
    rows = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read attributes {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
            rows[row["image"]] = row["attributes"]
    if not rows:
        raise InputError(f"no rows in {path}")
    return rows


def run_eval(
    task: str,
    predictions,
    ground_truth,
    normalizer: str = "diag",
    threshold: float = 0.1,
    eye_indices: tuple[int, int] | None = None,
    groups=None,
    reference: str | None = None,
) -> MetricReport:
    if task == "parsing":
        pairs = _paired_stems(predictions, ground_truth, ".png")
        loaded = [(load_label_map(p), load_label_map(g)) for p, g in pairs]
        classes = max(int(arr.max()) for pair in loaded for arr in pair) + 1
        acc = ConfusionAccumulator(max(2, classes))
        for pred_arr, gt_arr in loaded:
            acc.update(pred_arr, gt_arr)
        per_class = acc.per_class_f1()
        return MetricReport(
            per_class_f1=[None if math.isnan(v) else v for v in per_class],
            mean_f1=acc.mean_f1(),
        )
    if task == "alignment":
        pred_files = sorted(Path(predictions).glob("*.txt"))
        if not pred_files:
            raise InputError(f"no .txt predictions under {predictions}")
        errors = []
        for pred_path in pred_files:
            gt_path = Path(ground_truth) / pred_path.name
            if not gt_path.exists():
                raise InputError(f"missing ground truth {gt_path}")
            pred = load_landmarks(pred_path)
            gt = load_landmarks(gt_path)
            if len(pred) != 1 or len(gt) != 1:
                raise InputError(f"{pred_path.name}: need exactly one face per file")
            kwargs = {}
            if normalizer in ("diag", "box"):
                lo, hi = gt[0].min(axis=0), gt[0].max(axis=0)
                kwargs["box"] = (hi[0] - lo[0], hi[1] - lo[1])
            if normalizer == "inter_ocular":
                kwargs["eye_indices"] = eye_indices or (0, 1)
            errors.append(nme(pred[0], gt[0], normalizer=normalizer, **kwargs))
        values = np.array(errors)
        key = f"{threshold:g}"
        return MetricReport(
            nme={normalizer: float(values.mean())},
            failure_rate={key: failure_rate(values, threshold)},
            auc={key: auc_ced(values, threshold)},
            notes=[f"normalizer={normalizer}"],
        )
    if task == "attributes":
        pred_rows = _read_attribute_rows(predictions)
        gt_rows = _read_attribute_rows(ground_truth)
        names = sorted(gt_rows)
        missing = [n for n in names if n not in pred_rows]
        if missing:
            raise InputError(f"predictions missing for {missing[:3]}")
        pred = np.array([pred_rows[n] for n in names])
        gt = np.array([gt_rows[n] for n in names])
        report = MetricReport(mean_attr_accuracy=mean_accuracy(pred > 0, gt > 0))
        if groups:
            by_group: dict[str, tuple[float, int]] = {}
            for group_name, members in groups.items():
                rows = [n for n in names if n in set(members)]
                if not rows:
                    raise InputError(f"group '{group_name}' matches no images")
                gp = np.array([pred_rows[n] for n in rows])
                gg = np.array([gt_rows[n] for n in rows])
                by_group[group_name] = (mean_accuracy(gp > 0, gg > 0), len(rows))
            report.group_accuracy = {k: v[0] for k, v in by_group.items()}
            report.group_count = {k: v[1] for k, v in by_group.items()}
            if reference:
                pooled = [k for k in by_group if k != reference]
                report.group_discrepancy = group_discrepancy(
                    by_group, reference, pooled
                )
        return report
    raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")


def run_curate(
    input_manifest,
    output_manifest,
    target_size: int,
    seed: int,
    threshold: float,
    rejects=None,
) -> dict:
    stats = curate_manifest(
        input_manifest,
        output_manifest,
        target_size,
        seed,
        threshold=threshold,
        rejects_path=rejects,
    )
    return {
        "output_manifest": str(output_manifest),
        "read": stats.read,
        "kept": stats.kept,
        "below_threshold": stats.below_threshold,
        "rejected": stats.rejected,
    }


def run_fewshot(manifest, fraction: float, seed: int, output_manifest) -> dict:
    _, records = read_manifest(manifest)
    split = DatasetSplit(records=records)
    subset = fewshot_subset(split, fraction, seed)
    write_manifest(
        output_manifest,
        subset.records,
        {"fraction": fraction, "seed": seed, "count": len(subset)},
    )
    return {
        "output_manifest": str(output_manifest),
        "parent_count": len(records),
        "count": len(subset),
    }


def run_gradcam(
    config: RunConfig,
    image_path,
    text: str,
    grid_out,
    overlay_out,
    checkpoint=None,
) -> dict:
    seed_everything(config.seed, config.deterministic)
    tokenizer = TextTokenizer()
    if checkpoint is not None:
        model, config, _ = load_backbone(checkpoint, config, tokenizer)
    else:
        model = build_model(config, tokenizer)
    array = load_image(image_path)
    size = model.config.image_size
    if array.shape[0] != size or array.shape[1] != size:
        raise InputError(
            f"image is {array.shape[1]}x{array.shape[0]}, model takes {size}x{size}"
        )
    image = batch_tensor([array])[0]
    saliency = gradcam(model, image, text, tokenizer)
    save_saliency_grid(grid_out, saliency)
    save_overlay(overlay_out, saliency, image)
    return {
        "grid": str(grid_out),
        "overlay": str(overlay_out),
        "degenerate": saliency.degenerate,
        "shape": list(saliency.values.shape),
    }


def run_report(report_paths: list, output_path=None) -> dict:
    """Combine run reports into comparison and per-run text tables."""
    if not report_paths:
        raise InputError("no run reports given")
    reports = [read_report(p) for p in report_paths]
    lines: list[str] = []
    lines.append("variant            seed  F1-mean  NME      mAcc")
    for rep in reports:
        toggles = rep.config.get("toggles", "?")
        metrics = MetricReport.from_dict(rep.metrics) if rep.metrics else None
        f1 = f"{metrics.mean_f1:7.2f}" if metrics and metrics.mean_f1 is not None else "      -"
        nme_txt = "       -"
        if metrics and metrics.nme:
            first = sorted(metrics.nme)[0]
            nme_txt = f"{metrics.nme[first]:8.5f}"
        macc = (
            f"{metrics.mean_attr_accuracy:6.2f}"
            if metrics and metrics.mean_attr_accuracy is not None
            else "     -"
        )
        lines.append(f"{toggles:<18} {rep.seed:>4} {f1} {nme_txt} {macc}")
    lines.append("")
    for path, rep in zip(report_paths, reports):
        lines.append(f"== {rep.command} ({path})")
        lines.append(f"toggles: {rep.config.get('toggles', '?')}  seed: {rep.seed}")
        if rep.checkpoint_sha256:
            lines.append(f"checkpoint: sha256 {rep.checkpoint_sha256}")
        if rep.metrics:
            lines.append(format_report(MetricReport.from_dict(rep.metrics)).rstrip())
        lines.append("")
    text = "\n".join(lines).rstrip() + "\n"
    if output_path is not None:
        with open(output_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return {"text": text, "runs": len(reports), "output": None if output_path is None else str(output_path)}
