"""Versioned binary checkpoints with a JSON tensor manifest.

Layout: 4-byte magic, little-endian uint32 version, little-endian uint64
header length, UTF-8 JSON header, then raw tensor data. Every tensor is
stored as little-endian float32 at the offset its manifest entry states,
so tools can read single tensors without parsing the rest.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np
import torch

from facerep.errors import InputError

MAGIC = b"FRCK"
VERSION = 1


def _to_float32_array(value) -> np.ndarray:
    if isinstance(value, torch.Tensor):
        value = value.detach().cpu().numpy()
    arr = np.asarray(value)
    if not np.issubdtype(arr.dtype, np.floating):
        raise InputError(f"only float tensors are supported, got dtype {arr.dtype}")
    return np.ascontiguousarray(arr, dtype="<f4")


def save_checkpoint(path, tensors: dict, metadata: dict | None = None) -> str:
    """Write tensors and metadata; returns the file's sha256 hex digest."""
    if not tensors:
        raise InputError("refusing to write an empty checkpoint")
    manifest = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = _to_float32_array(tensors[name])
        raw = arr.tobytes()
        manifest.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": "float32",
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"metadata": metadata or {}, "tensors": manifest}, ensure_ascii=False
    ).encode("utf-8")
    digest = hashlib.sha256()
    with open(path, "wb") as fh:
        for chunk in (MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(header)), header, *blobs):
            fh.write(chunk)
            digest.update(chunk)
    return digest.hexdigest()


def checkpoint_hash(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read checkpoint {path}: {exc}") from exc
    if blob[:4] != MAGIC:
        raise InputError(f"{path} is not a checkpoint (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise InputError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", blob, 8)
    header_start = 16
    data_start = header_start + header_len
    if data_start > len(blob):
        raise InputError("checkpoint truncated inside header")
    try:
        header = json.loads(blob[header_start:data_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"corrupt checkpoint header: {exc}") from exc
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        if entry["dtype"] != "float32":
            raise InputError(f"unsupported tensor dtype {entry['dtype']}")
        start = data_start + entry["offset"]
        end = start + entry["nbytes"]
        if end > len(blob):
            raise InputError(f"checkpoint truncated inside tensor '{entry['name']}'")
        arr = np.frombuffer(blob[start:end], dtype="<f4").reshape(entry["shape"])
        tensors[entry["name"]] = arr.copy()
    return tensors, header.get("metadata", {})


def state_tensors(module: torch.nn.Module, prefix: str = "") -> dict[str, np.ndarray]:
    return {
        prefix + name: tensor
        for name, tensor in module.state_dict().items()
    }


def load_into(module: torch.nn.Module, tensors: dict[str, np.ndarray], prefix: str = "") -> None:
    """Copy checkpointed values into a module, strict on names and shapes."""
    state = module.state_dict()
    selected = {
        name[len(prefix):]: value
        for name, value in tensors.items()
        if name.startswith(prefix)
    }
    missing = sorted(set(state) - set(selected))
    unexpected = sorted(set(selected) - set(state))
    if missing or unexpected:
        raise InputError(
            f"checkpoint mismatch under prefix '{prefix}': "
            f"missing {missing[:5]}, unexpected {unexpected[:5]}"
        )
    converted = {}
    for name, value in selected.items():
        target = state[name]
        if tuple(value.shape) != tuple(target.shape):
            raise InputError(
                f"tensor '{prefix}{name}' has shape {tuple(value.shape)}, "
                f"expected {tuple(target.shape)}"
            )
        converted[name] = torch.tensor(np.asarray(value), dtype=target.dtype)
    module.load_state_dict(converted)


def parameter_fingerprint(module: torch.nn.Module) -> str:
    """Order-stable hash of all parameter values, for frozen-weight checks."""
    digest = hashlib.sha256()
    state = module.state_dict()
    for name in sorted(state):
        digest.update(name.encode("utf-8"))
        digest.update(
            np.ascontiguousarray(state[name].detach().cpu().numpy(), dtype="<f4").tobytes()
        )
    return digest.hexdigest()
