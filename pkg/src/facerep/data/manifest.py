"""Newline-delimited manifest files for image-text pairs with face metadata.

Each line is a JSON object with fixed key order: image_ref, caption,
face_score, face_count, faces. ``faces`` holds one flattened 10-float
coordinate list per detected face. An optional first line starting with
``#`` carries a JSON header describing how the file was produced.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from facerep.errors import InputError

_FIELDS = ("image_ref", "caption", "face_score", "face_count", "faces")


@dataclass
class ManifestRecord:
    image_ref: str
    caption: str
    face_score: float
    face_count: int
    faces: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not isinstance(self.image_ref, str) or not self.image_ref:
            raise InputError("image_ref must be a non-empty string")
        if not isinstance(self.caption, str):
            raise InputError("caption must be a string")
        self.face_score = float(self.face_score)
        if not (0.0 <= self.face_score <= 1.0):
            raise InputError(f"face_score must be in [0, 1], got {self.face_score}")
        self.faces = [np.asarray(f, dtype=np.float64).reshape(-1, 2) for f in self.faces]
        for f in self.faces:
            if f.shape != (5, 2):
                raise InputError(f"each face needs 5 points, got shape {f.shape}")
            if not np.all(np.isfinite(f)):
                raise InputError("face landmarks must be finite")
        if int(self.face_count) != len(self.faces):
            raise InputError(
                f"face_count {self.face_count} does not match {len(self.faces)} faces"
            )
        self.face_count = int(self.face_count)

    def to_json(self) -> str:
        obj = {
            "image_ref": self.image_ref,
            "caption": self.caption,
            "face_score": self.face_score,
            "face_count": self.face_count,
            "faces": [[float(v) for v in f.ravel()] for f in self.faces],
        }
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "ManifestRecord":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed manifest line: {exc}") from exc
        if not isinstance(obj, dict):
            raise InputError("manifest line must be a JSON object")
        missing = [k for k in _FIELDS if k not in obj]
        if missing:
            raise InputError(f"manifest line missing fields {missing}")
        return cls(
            image_ref=obj["image_ref"],
            caption=obj["caption"],
            face_score=obj["face_score"],
            face_count=obj["face_count"],
            faces=obj["faces"],
        )


def write_manifest(path, records: Iterable[ManifestRecord], header: dict | None = None) -> int:
    """Write records one per line; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write("#" + json.dumps(header, ensure_ascii=False) + "\n")
        for rec in records:
            fh.write(rec.to_json() + "\n")
            count += 1
    return count


def _parse_header(line: str) -> dict:
    try:
        obj = json.loads(line[1:])
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed manifest header: {exc}") from exc
    if not isinstance(obj, dict):
        raise InputError("manifest header must be a JSON object")
    return obj


def iter_manifest(path) -> Iterator[ManifestRecord]:
    """Stream records without loading the whole file."""
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if lineno == 1:
                    continue
                raise InputError(f"{path}:{lineno}: header allowed only on line 1")
            try:
                yield ManifestRecord.from_json(line)
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc


def read_manifest(path) -> tuple[dict | None, list[ManifestRecord]]:
    header = None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from exc
    if first.startswith("#"):
        header = _parse_header(first.strip())
    return header, list(iter_manifest(path))
