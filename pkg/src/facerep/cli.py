"""Command-line client for the command service.

By default the service runs in-process; ``--server`` points the same
commands at a remote instance.  Exit codes: 0 success, 1 config or input
error, 2 runtime error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

_EXIT_BY_CODE = {"config": 1, "input": 1, "runtime": 2, "numerical": 3}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument(
        "--deterministic",
        action="store_true",
        default=None,
        help="fixed seeds, no wall-clock in reports",
    )
    parser.add_argument("--toggles", help="comma list, e.g. ITC,MIM1,ALIGN")
    parser.add_argument(
        "--resolution", type=int, choices=(224, 448), help="input resolution"
    )
    parser.add_argument("--fraction", type=float, help="few-shot fraction")
    parser.add_argument("--layers", help="tap layers, e.g. 4,6,8,12")


def _source_payload(args: argparse.Namespace) -> dict:
    layers = None
    if getattr(args, "layers", None):
        layers = [int(v) for v in args.layers.split(",") if v.strip()]
    return {
        "config_path": getattr(args, "config", None),
        "seed": getattr(args, "seed", None),
        "deterministic": getattr(args, "deterministic", None),
        "toggles": getattr(args, "toggles", None),
        "resolution": getattr(args, "resolution", None),
        "fraction": getattr(args, "fraction", None),
        "layers": layers,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="facerep", description="facial representation learning toolkit"
    )
    parser.add_argument(
        "--server",
        help="base URL of a running service; default runs in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curate", help="filter and sample a raw manifest")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--size", type=int, required=True, help="target record count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--rejects", help="write rejected lines here")

    p = sub.add_parser("pretrain", help="contrastive + masked-patch pre-training")
    _add_config_flags(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--checkpoint-out", required=True)
    p.add_argument("--log-out")
    p.add_argument("--report-out")

    for name, descr in (
        ("probe", "train a head on a frozen backbone"),
        ("finetune", "train head and backbone jointly"),
    ):
        p = sub.add_parser(name, help=descr)
        _add_config_flags(p)
        p.add_argument("--task", required=True, choices=("parsing", "alignment", "attributes"))
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--images", required=True)
        p.add_argument("--targets", required=True)
        p.add_argument("--head-out", required=True)
        p.add_argument("--epochs", type=int)
        p.add_argument("--report-out")

    p = sub.add_parser("predict", help="write per-image predictions")
    _add_config_flags(p)
    p.add_argument("--task", required=True, choices=("parsing", "alignment", "attributes"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--head-checkpoint", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--task", required=True, choices=("parsing", "alignment", "attributes"))
    p.add_argument("--predictions", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument(
        "--normalizer", default="diag", choices=("diag", "box", "inter_ocular")
    )
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--eye-indices", help="two indices, e.g. 0,1")
    p.add_argument("--groups", help="JSON file mapping group name to image names")
    p.add_argument("--reference", help="reference group for the discrepancy")

    p = sub.add_parser("fewshot", help="seeded fractional subset of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)

    p = sub.add_parser("gradcam", help="text-conditioned saliency")
    _add_config_flags(p)
    p.add_argument("--checkpoint")
    p.add_argument("--image", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--grid-out", required=True)
    p.add_argument("--overlay-out", required=True)

    p = sub.add_parser("report", help="combine run reports into tables")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--output")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _request_for(args: argparse.Namespace) -> tuple[str, dict]:
    command = args.command
    if command == "curate":
        return "/v1/curate", {
            "input_manifest": args.input,
            "output_manifest": args.output,
            "target_size": args.size,
            "seed": args.seed,
            "threshold": args.threshold,
            "rejects": args.rejects,
        }
    if command == "pretrain":
        return "/v1/pretrain", {
            "source": _source_payload(args),
            "manifest": args.manifest,
            "images_dir": args.images,
            "steps": args.steps,
            "checkpoint_out": args.checkpoint_out,
            "log_out": args.log_out,
            "report_out": args.report_out,
        }
    if command in ("probe", "finetune"):
        return f"/v1/{command}", {
            "source": _source_payload(args),
            "task": args.task,
            "checkpoint": args.checkpoint,
            "images_dir": args.images,
            "targets": args.targets,
            "head_out": args.head_out,
            "epochs": args.epochs,
            "report_out": args.report_out,
        }
    if command == "predict":
        return "/v1/predict", {
            "source": _source_payload(args),
            "task": args.task,
            "checkpoint": args.checkpoint,
            "head_checkpoint": args.head_checkpoint,
            "images_dir": args.images,
            "out_dir": args.out,
        }
    if command == "eval":
        eyes = None
        if args.eye_indices:
            parts = [int(v) for v in args.eye_indices.split(",")]
            eyes = (parts[0], parts[1]) if len(parts) == 2 else None
        groups = None
        if args.groups:
            with open(args.groups, "r", encoding="utf-8") as fh:
                groups = json.load(fh)
        return "/v1/eval", {
            "task": args.task,
            "predictions": args.predictions,
            "ground_truth": args.ground_truth,
            "normalizer": args.normalizer,
            "threshold": args.threshold,
            "eye_indices": eyes,
            "groups": groups,
            "reference": args.reference,
        }
    if command == "fewshot":
        return "/v1/fewshot", {
            "manifest": args.manifest,
            "fraction": args.fraction,
            "seed": args.seed,
            "output_manifest": args.output,
        }
    if command == "gradcam":
        return "/v1/gradcam", {
            "source": _source_payload(args),
            "image": args.image,
            "text": args.text,
            "grid_out": args.grid_out,
            "overlay_out": args.overlay_out,
            "checkpoint": args.checkpoint,
        }
    if command == "report":
        return "/v1/report", {"runs": args.runs, "output": args.output}
    raise ValueError(f"unhandled command {command}")


def _open_client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=600.0)
    from fastapi.testclient import TestClient

    from facerep.service import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from facerep.service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    path, payload = _request_for(args)
    with _open_client(args.server) as client:
        response = client.post(path, json=payload)
    try:
        body = response.json()
    except ValueError:
        print(f"malformed response ({response.status_code})", file=sys.stderr)
        return 2
    if response.status_code == 200:
        if args.command == "report":
            sys.stdout.write(body["text"])
        else:
            print(json.dumps(body, indent=2))
        return 0
    error = body.get("error", {})
    code = error.get("code", "runtime")
    print(f"error ({code}): {error.get('message', 'unknown')}", file=sys.stderr)
    return _EXIT_BY_CODE.get(code, 2)


if __name__ == "__main__":
    sys.exit(main())
