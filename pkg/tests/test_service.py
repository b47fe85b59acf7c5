"""HTTP service integration: every endpoint plus the error envelope."""

import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

import facerep
from facerep import workflows
from facerep.checkpoint import checkpoint_hash
from facerep.errors import NumericalError, RuntimeFailure
from facerep.service import create_app
from synth import write_face_corpus

CONFIGS_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app(), raise_server_exceptions=False) as c:
        yield c


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return write_face_corpus(tmp_path_factory.mktemp("corpus"), n=12, size=32, seed=0)


@pytest.fixture(scope="module")
def source():
    return {"config_path": str(CONFIGS_DIR / "miniature.yaml"), "seed": 3}


def ok(client, path, payload):
    response = client.post(path, json=payload)
    assert response.status_code == 200, response.text
    return response.json()


def error_of(client, path, payload):
    response = client.post(path, json=payload)
    assert response.status_code != 200
    body = response.json()
    assert set(body) == {"error"} and set(body["error"]) == {"code", "message"}
    return response.status_code, body["error"]


@pytest.fixture(scope="module")
def pretrained(client, corpus, source, tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    curated = out / "curated.jsonl"
    ok(
        client,
        "/v1/curate",
        {
            "input_manifest": str(corpus["manifest"]),
            "output_manifest": str(curated),
            "target_size": 10,
            "seed": 1,
        },
    )
    body = ok(
        client,
        "/v1/pretrain",
        {
            "source": source,
            "manifest": str(curated),
            "images_dir": str(corpus["images"]),
            "steps": 4,
            "checkpoint_out": str(out / "pre.ckpt"),
            "log_out": str(out / "pre.log.jsonl"),
            "report_out": str(out / "pre.report.json"),
        },
    )
    return {"out": out, "curated": curated, "checkpoint": out / "pre.ckpt", "body": body}


@pytest.fixture(scope="module")
def attr_probe(client, corpus, source, pretrained):
    out = pretrained["out"]
    body = ok(
        client,
        "/v1/probe",
        {
            "source": source,
            "task": "attributes",
            "checkpoint": str(pretrained["checkpoint"]),
            "images_dir": str(corpus["images"]),
            "targets": str(corpus["attributes"]),
            "head_out": str(out / "attr.ckpt"),
            "epochs": 60,
            "report_out": str(out / "attr.report.json"),
        },
    )
    return {"head": out / "attr.ckpt", "body": body}


def test_health(client):
    body = client.get("/health").json()
    assert body == {"status": "ok", "version": facerep.__version__}


class TestCurate:
    def test_counts_and_header(self, client, corpus, tmp_path):
        out = tmp_path / "kept.jsonl"
        body = ok(
            client,
            "/v1/curate",
            {
                "input_manifest": str(corpus["manifest"]),
                "output_manifest": str(out),
                "target_size": 5,
                "seed": 0,
            },
        )
        assert body["read"] == 12 and body["kept"] == 5
        first = out.read_text().splitlines()[0]
        assert first.startswith("#") and json.loads(first[1:])["count"] == 5

    def test_rejects_sink(self, client, tmp_path):
        raw = tmp_path / "raw.jsonl"
        good = {
            "image_ref": "a.png",
            "caption": "x",
            "face_score": 0.99,
            "face_count": 0,
            "faces": [],
        }
        low = dict(good, image_ref="b.png", face_score=0.2)
        raw.write_text(json.dumps(good) + "\n{broken\n" + json.dumps(low) + "\n")
        body = ok(
            client,
            "/v1/curate",
            {
                "input_manifest": str(raw),
                "output_manifest": str(tmp_path / "kept.jsonl"),
                "target_size": 1,
                "seed": 0,
                "rejects": str(tmp_path / "bad.jsonl"),
            },
        )
        assert body["kept"] == 1 and body["below_threshold"] == 1
        assert body["rejected"] == {"parse_error": 1}
        rejected = json.loads((tmp_path / "bad.jsonl").read_text())
        assert rejected["reason"] == "parse_error"

    def test_missing_input_is_input_error(self, client, tmp_path):
        status, err = error_of(
            client,
            "/v1/curate",
            {
                "input_manifest": str(tmp_path / "absent.jsonl"),
                "output_manifest": str(tmp_path / "out.jsonl"),
                "target_size": 3,
            },
        )
        assert status == 400 and err["code"] == "input"


class TestPretrain:
    def test_artifacts(self, pretrained):
        body = pretrained["body"]
        assert body["steps"] == 4
        assert checkpoint_hash(pretrained["checkpoint"]) == body["checkpoint_sha256"]
        log_lines = (pretrained["out"] / "pre.log.jsonl").read_text().splitlines()
        assert len(log_lines) == 4
        report = json.loads((pretrained["out"] / "pre.report.json").read_text())
        assert report["command"] == "pretrain"
        assert report["checkpoint_sha256"] == body["checkpoint_sha256"]
        assert report["config"]["toggles"] == "ITC,MIM1,ALIGN"

    def test_loss_is_finite(self, pretrained):
        body = pretrained["body"]
        assert np.isfinite(body["first_loss"]) and np.isfinite(body["final_loss"])

    def test_empty_manifest_is_input_error(self, client, source, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        status, err = error_of(
            client,
            "/v1/pretrain",
            {
                "source": source,
                "manifest": str(empty),
                "images_dir": str(tmp_path),
                "steps": 1,
                "checkpoint_out": str(tmp_path / "c.ckpt"),
            },
        )
        assert status == 400 and err["code"] == "input"

    def test_nonpositive_steps_is_config_error(self, client, source, corpus, tmp_path):
        status, err = error_of(
            client,
            "/v1/pretrain",
            {
                "source": source,
                "manifest": str(corpus["manifest"]),
                "images_dir": str(corpus["images"]),
                "steps": 0,
                "checkpoint_out": str(tmp_path / "c.ckpt"),
            },
        )
        assert status == 400 and err["code"] == "config"


class TestHeadTraining:
    def test_probe_keeps_backbone_frozen(self, attr_probe):
        body = attr_probe["body"]
        assert body["backbone_fingerprint_before"] == body["backbone_fingerprint_after"]
        assert body["last_loss"] < body["first_loss"]
        assert body["metrics"]["mean_attr_accuracy"] > 60.0

    def test_finetune_moves_backbone(self, client, corpus, source, pretrained, tmp_path):
        body = ok(
            client,
            "/v1/finetune",
            {
                "source": source,
                "task": "attributes",
                "checkpoint": str(pretrained["checkpoint"]),
                "images_dir": str(corpus["images"]),
                "targets": str(corpus["attributes"]),
                "head_out": str(tmp_path / "ft.ckpt"),
                "epochs": 3,
            },
        )
        assert body["backbone_fingerprint_before"] != body["backbone_fingerprint_after"]

    def test_parsing_probe(self, client, corpus, source, pretrained, tmp_path):
        body = ok(
            client,
            "/v1/probe",
            {
                "source": source,
                "task": "parsing",
                "checkpoint": str(pretrained["checkpoint"]),
                "images_dir": str(corpus["images"]),
                "targets": str(corpus["masks"]),
                "head_out": str(tmp_path / "parse.ckpt"),
                "epochs": 3,
            },
        )
        assert body["metrics"]["mean_f1"] is not None
        assert len(body["metrics"]["per_class_f1"]) == 3

    def test_alignment_probe(self, client, corpus, source, pretrained, tmp_path):
        body = ok(
            client,
            "/v1/probe",
            {
                "source": source,
                "task": "alignment",
                "checkpoint": str(pretrained["checkpoint"]),
                "images_dir": str(corpus["images"]),
                "targets": str(corpus["landmarks"]),
                "head_out": str(tmp_path / "align.ckpt"),
                "epochs": 2,
            },
        )
        assert body["metrics"]["nme"]["diag"] > 0.0

    def test_unknown_task_is_config_error(self, client, corpus, source, pretrained, tmp_path):
        status, err = error_of(
            client,
            "/v1/probe",
            {
                "source": source,
                "task": "segmentation",
                "checkpoint": str(pretrained["checkpoint"]),
                "images_dir": str(corpus["images"]),
                "targets": str(corpus["masks"]),
                "head_out": str(tmp_path / "x.ckpt"),
            },
        )
        assert status == 400 and err["code"] == "config"

    def test_missing_checkpoint_is_input_error(self, client, corpus, source, tmp_path):
        status, err = error_of(
            client,
            "/v1/probe",
            {
                "source": source,
                "task": "attributes",
                "checkpoint": str(tmp_path / "gone.ckpt"),
                "images_dir": str(corpus["images"]),
                "targets": str(corpus["attributes"]),
                "head_out": str(tmp_path / "x.ckpt"),
            },
        )
        assert status == 400 and err["code"] == "input"

    def test_default_layers_rejected_for_shallow_backbone(
        self, client, corpus, pretrained, tmp_path
    ):
        # The miniature backbone has 4 blocks; the built-in taps reach 12.
        status, err = error_of(
            client,
            "/v1/probe",
            {
                "task": "attributes",
                "checkpoint": str(pretrained["checkpoint"]),
                "images_dir": str(corpus["images"]),
                "targets": str(corpus["attributes"]),
                "head_out": str(tmp_path / "x.ckpt"),
            },
        )
        assert status == 400 and err["code"] == "config"
        assert "exceeds image depth" in err["message"]


class TestPredictEval:
    def test_predict_then_eval_matches_probe(
        self, client, corpus, source, pretrained, attr_probe, tmp_path
    ):
        pred = ok(
            client,
            "/v1/predict",
            {
                "source": source,
                "task": "attributes",
                "checkpoint": str(pretrained["checkpoint"]),
                "head_checkpoint": str(attr_probe["head"]),
                "images_dir": str(corpus["images"]),
                "out_dir": str(tmp_path / "pred"),
            },
        )
        assert pred["count"] == 12
        evaluated = ok(
            client,
            "/v1/eval",
            {
                "task": "attributes",
                "predictions": pred["outputs"][0],
                "ground_truth": str(corpus["attributes"]),
            },
        )
        assert (
            evaluated["metrics"]["mean_attr_accuracy"]
            == attr_probe["body"]["metrics"]["mean_attr_accuracy"]
        )
        assert "mAcc" in evaluated["text"]

    def test_eval_groups_and_discrepancy(
        self, client, corpus, source, pretrained, attr_probe, tmp_path
    ):
        pred = ok(
            client,
            "/v1/predict",
            {
                "source": source,
                "task": "attributes",
                "checkpoint": str(pretrained["checkpoint"]),
                "head_checkpoint": str(attr_probe["head"]),
                "images_dir": str(corpus["images"]),
                "out_dir": str(tmp_path / "pred"),
            },
        )
        names = sorted(p.name for p in corpus["images"].glob("*.png"))
        groups = {"first": names[:6], "second": names[6:]}
        body = ok(
            client,
            "/v1/eval",
            {
                "task": "attributes",
                "predictions": pred["outputs"][0],
                "ground_truth": str(corpus["attributes"]),
                "groups": groups,
                "reference": "first",
            },
        )
        metrics = body["metrics"]
        assert set(metrics["group_accuracy"]) == {"first", "second"}
        assert metrics["group_count"] == {"first": 6, "second": 6}
        assert metrics["group_discrepancy"] is not None

    def test_missing_prediction_rows(self, client, corpus, tmp_path):
        partial = tmp_path / "partial.jsonl"
        partial.write_text(
            json.dumps({"image": "face_0000.png", "attributes": [1, 0, 0, 0]}) + "\n"
        )
        status, err = error_of(
            client,
            "/v1/eval",
            {
                "task": "attributes",
                "predictions": str(partial),
                "ground_truth": str(corpus["attributes"]),
            },
        )
        assert status == 400 and err["code"] == "input"


class TestFewshot:
    def test_subset_written(self, client, pretrained, tmp_path):
        out = tmp_path / "few.jsonl"
        body = ok(
            client,
            "/v1/fewshot",
            {
                "manifest": str(pretrained["curated"]),
                "fraction": 0.3,
                "seed": 4,
                "output_manifest": str(out),
            },
        )
        assert body["parent_count"] == 10 and body["count"] == 3
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert len(lines) == 3

    def test_bad_fraction(self, client, pretrained, tmp_path):
        status, err = error_of(
            client,
            "/v1/fewshot",
            {
                "manifest": str(pretrained["curated"]),
                "fraction": 1.5,
                "output_manifest": str(tmp_path / "few.jsonl"),
            },
        )
        assert status == 400 and err["code"] in ("config", "input")


class TestGradcam:
    def test_artifacts(self, client, corpus, source, pretrained, tmp_path):
        image = sorted(corpus["images"].glob("*.png"))[0]
        body = ok(
            client,
            "/v1/gradcam",
            {
                "source": source,
                "checkpoint": str(pretrained["checkpoint"]),
                "image": str(image),
                "text": "a face with red background",
                "grid_out": str(tmp_path / "cam.txt"),
                "overlay_out": str(tmp_path / "cam.png"),
            },
        )
        grid = np.loadtxt(tmp_path / "cam.txt")
        assert grid.shape == tuple(body["shape"]) == (2, 2)
        assert grid.min() >= 0.0 and grid.max() <= 1.0
        with Image.open(tmp_path / "cam.png") as overlay:
            assert overlay.size == (32, 32)

    def test_wrong_image_size_is_input_error(self, client, source, pretrained, tmp_path):
        bad = tmp_path / "big.png"
        Image.new("RGB", (64, 64)).save(bad)
        status, err = error_of(
            client,
            "/v1/gradcam",
            {
                "source": source,
                "checkpoint": str(pretrained["checkpoint"]),
                "image": str(bad),
                "text": "a face",
                "grid_out": str(tmp_path / "cam.txt"),
                "overlay_out": str(tmp_path / "cam.png"),
            },
        )
        assert status == 400 and err["code"] == "input"


class TestReport:
    def test_combined_tables(self, client, pretrained, attr_probe, tmp_path):
        out = tmp_path / "tables.txt"
        body = ok(
            client,
            "/v1/report",
            {
                "runs": [
                    str(pretrained["out"] / "pre.report.json"),
                    str(pretrained["out"] / "attr.report.json"),
                ],
                "output": str(out),
            },
        )
        assert body["runs"] == 2
        text = out.read_text()
        assert text == body["text"]
        assert "variant" in text and "ITC,MIM1,ALIGN" in text
        assert "== pretrain" in text and "== probe" in text

    def test_missing_report_is_input_error(self, client, tmp_path):
        status, err = error_of(
            client, "/v1/report", {"runs": [str(tmp_path / "gone.json")]}
        )
        assert status == 400 and err["code"] == "input"


class TestEnvelope:
    def test_request_validation_maps_to_config(self, client):
        status, err = error_of(
            client, "/v1/fewshot", {"manifest": "x", "fraction": 0.5}
        )
        assert status == 400 and err["code"] == "config"

    def test_extra_request_field_rejected(self, client, pretrained, tmp_path):
        status, err = error_of(
            client,
            "/v1/fewshot",
            {
                "manifest": str(pretrained["curated"]),
                "fraction": 0.5,
                "output_manifest": str(tmp_path / "f.jsonl"),
                "verbose": True,
            },
        )
        assert status == 400 and err["code"] == "config"

    def test_both_config_sources_rejected(self, client, corpus, tmp_path):
        status, err = error_of(
            client,
            "/v1/pretrain",
            {
                "source": {
                    "config_path": str(CONFIGS_DIR / "miniature.yaml"),
                    "config": {"seed": 1},
                },
                "manifest": str(corpus["manifest"]),
                "images_dir": str(corpus["images"]),
                "steps": 1,
                "checkpoint_out": str(tmp_path / "c.ckpt"),
            },
        )
        assert status == 400 and err["code"] == "config"

    def test_numerical_failure_maps_to_500(self, client, monkeypatch):
        def explode(*args, **kwargs):
            raise NumericalError("synthetic overflow")

        monkeypatch.setattr(workflows, "run_fewshot", explode)
        status, err = error_of(
            client,
            "/v1/fewshot",
            {"manifest": "x", "fraction": 0.5, "output_manifest": "y"},
        )
        assert status == 500 and err["code"] == "numerical"
        assert "synthetic overflow" in err["message"]

    def test_runtime_failure_maps_to_500(self, client, monkeypatch):
        def explode(*args, **kwargs):
            raise RuntimeFailure("frozen backbone changed")

        monkeypatch.setattr(workflows, "run_fewshot", explode)
        status, err = error_of(
            client,
            "/v1/fewshot",
            {"manifest": "x", "fraction": 0.5, "output_manifest": "y"},
        )
        assert status == 500 and err["code"] == "runtime"

    def test_unexpected_exception_maps_to_runtime(self, client, monkeypatch):
        def explode(*args, **kwargs):
            raise ValueError("not a facerep error")

        monkeypatch.setattr(workflows, "run_fewshot", explode)
        status, err = error_of(
            client,
            "/v1/fewshot",
            {"manifest": "x", "fraction": 0.5, "output_manifest": "y"},
        )
        assert status == 500 and err["code"] == "runtime"
        assert "ValueError" in err["message"]
