"""Command-line client: flag parsing, payload assembly, exit codes."""

import json
from pathlib import Path

import pytest

from facerep.cli import _request_for, _source_payload, build_parser, main
from synth import write_face_corpus

CONFIGS_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return write_face_corpus(tmp_path_factory.mktemp("cli"), n=8, size=32, seed=0)


class TestParsing:
    def test_all_subcommands_exist(self):
        parser = build_parser()
        sub = next(
            a for a in parser._actions if isinstance(a, type(parser._subparsers._group_actions[0]))
        )
        names = set(sub.choices)
        assert {
            "curate",
            "pretrain",
            "probe",
            "finetune",
            "eval",
            "fewshot",
            "gradcam",
            "report",
            "predict",
            "serve",
        } <= names

    def test_override_flags_reach_source(self):
        args = build_parser().parse_args(
            [
                "pretrain",
                "--config",
                "cfg.yaml",
                "--seed",
                "7",
                "--deterministic",
                "--toggles",
                "ITC,MIM6",
                "--resolution",
                "448",
                "--fraction",
                "0.1",
                "--layers",
                "1,2,3,4",
                "--manifest",
                "m",
                "--images",
                "i",
                "--steps",
                "5",
                "--checkpoint-out",
                "c",
            ]
        )
        source = _source_payload(args)
        assert source == {
            "config_path": "cfg.yaml",
            "seed": 7,
            "deterministic": True,
            "toggles": "ITC,MIM6",
            "resolution": 448,
            "fraction": 0.1,
            "layers": [1, 2, 3, 4],
        }

    def test_flags_default_to_none(self):
        args = build_parser().parse_args(
            ["pretrain", "--manifest", "m", "--images", "i", "--steps", "1", "--checkpoint-out", "c"]
        )
        source = _source_payload(args)
        assert all(v is None for v in source.values())

    def test_resolution_restricted(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(
                ["pretrain", "--resolution", "300", "--manifest", "m",
                 "--images", "i", "--steps", "1", "--checkpoint-out", "c"]
            )

    def test_eval_payload(self, tmp_path):
        groups = tmp_path / "groups.json"
        groups.write_text(json.dumps({"a": ["x.png"]}))
        args = build_parser().parse_args(
            [
                "eval",
                "--task",
                "alignment",
                "--predictions",
                "p",
                "--ground-truth",
                "g",
                "--normalizer",
                "inter_ocular",
                "--eye-indices",
                "0,1",
                "--threshold",
                "0.08",
                "--groups",
                str(groups),
                "--reference",
                "a",
            ]
        )
        path, payload = _request_for(args)
        assert path == "/v1/eval"
        assert payload["normalizer"] == "inter_ocular"
        assert payload["eye_indices"] == (0, 1)
        assert payload["threshold"] == 0.08
        assert payload["groups"] == {"a": ["x.png"]}

    def test_probe_payload_path(self):
        args = build_parser().parse_args(
            ["probe", "--task", "parsing", "--checkpoint", "c", "--images", "i",
             "--targets", "t", "--head-out", "h"]
        )
        path, payload = _request_for(args)
        assert path == "/v1/probe"
        assert payload["task"] == "parsing" and payload["epochs"] is None


class TestExitCodes:
    def test_success_prints_json(self, corpus, tmp_path, capsys):
        out = tmp_path / "kept.jsonl"
        code = main(
            [
                "curate",
                "--input",
                str(corpus["manifest"]),
                "--output",
                str(out),
                "--size",
                "4",
            ]
        )
        assert code == 0
        body = json.loads(capsys.readouterr().out)
        assert body["kept"] == 4 and out.exists()

    def test_config_error_exits_1(self, corpus, tmp_path, capsys):
        code = main(
            [
                "pretrain",
                "--toggles",
                "MIM1",
                "--manifest",
                str(corpus["manifest"]),
                "--images",
                str(corpus["images"]),
                "--steps",
                "1",
                "--checkpoint-out",
                str(tmp_path / "c.ckpt"),
            ]
        )
        assert code == 1
        assert "error (config)" in capsys.readouterr().err

    def test_input_error_exits_1(self, tmp_path, capsys):
        code = main(
            [
                "curate",
                "--input",
                str(tmp_path / "absent.jsonl"),
                "--output",
                str(tmp_path / "out.jsonl"),
                "--size",
                "2",
            ]
        )
        assert code == 1
        assert "error (input)" in capsys.readouterr().err

    def test_runtime_error_exits_2(self, monkeypatch, tmp_path, capsys):
        from facerep import workflows
        from facerep.errors import RuntimeFailure

        def explode(*args, **kwargs):
            raise RuntimeFailure("boom")

        monkeypatch.setattr(workflows, "run_fewshot", explode)
        code = main(
            ["fewshot", "--manifest", "m", "--fraction", "0.5", "--output", "o"]
        )
        assert code == 2
        assert "error (runtime)" in capsys.readouterr().err

    def test_numerical_error_exits_3(self, monkeypatch, capsys):
        from facerep import workflows
        from facerep.errors import NumericalError

        def explode(*args, **kwargs):
            raise NumericalError("nan")

        monkeypatch.setattr(workflows, "run_fewshot", explode)
        code = main(
            ["fewshot", "--manifest", "m", "--fraction", "0.5", "--output", "o"]
        )
        assert code == 3
        assert "error (numerical)" in capsys.readouterr().err


class TestEndToEnd:
    def test_fewshot_roundtrip(self, corpus, tmp_path, capsys):
        out = tmp_path / "few.jsonl"
        code = main(
            [
                "fewshot",
                "--manifest",
                str(corpus["manifest"]),
                "--fraction",
                "0.25",
                "--seed",
                "1",
                "--output",
                str(out),
            ]
        )
        assert code == 0
        body = json.loads(capsys.readouterr().out)
        assert body["parent_count"] == 8 and body["count"] == 2

    def test_pretrain_and_report(self, corpus, tmp_path, capsys):
        ckpt = tmp_path / "pre.ckpt"
        report = tmp_path / "pre.report.json"
        code = main(
            [
                "pretrain",
                "--config",
                str(CONFIGS_DIR / "miniature.yaml"),
                "--seed",
                "2",
                "--deterministic",
                "--manifest",
                str(corpus["manifest"]),
                "--images",
                str(corpus["images"]),
                "--steps",
                "2",
                "--checkpoint-out",
                str(ckpt),
                "--report-out",
                str(report),
            ]
        )
        assert code == 0
        capsys.readouterr()
        assert ckpt.exists()
        stored = json.loads(report.read_text())
        assert stored["wall_clock_seconds"] is None  # deterministic run

        code = main(["report", "--runs", str(report)])
        assert code == 0
        text = capsys.readouterr().out
        assert "variant" in text and "ITC,MIM1,ALIGN" in text

    def test_deterministic_reruns_are_identical(self, corpus, tmp_path):
        reports = []
        for name in ("a", "b"):
            report = tmp_path / f"{name}.report.json"
            code = main(
                [
                    "pretrain",
                    "--config",
                    str(CONFIGS_DIR / "miniature.yaml"),
                    "--seed",
                    "5",
                    "--deterministic",
                    "--manifest",
                    str(corpus["manifest"]),
                    "--images",
                    str(corpus["images"]),
                    "--steps",
                    "2",
                    "--checkpoint-out",
                    str(tmp_path / f"{name}.ckpt"),
                    "--report-out",
                    str(report),
                ]
            )
            assert code == 0
            reports.append(report.read_bytes())
        assert reports[0] == reports[1]
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
