"""Plain-text landmark files: one face per line, comma-separated x,y pairs."""

from __future__ import annotations

import numpy as np

from facerep.errors import InputError


def save_landmarks(path, faces) -> None:
    """Write faces as lines of ``x0,y0,x1,y1,...``; each face is (L, 2)."""
    rows = []
    for face in faces:
        arr = np.asarray(face, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InputError(f"each face must have shape (L, 2), got {arr.shape}")
        rows.append(",".join(repr(float(v)) for v in arr.ravel()))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + ("\n" if rows else ""))


def load_landmarks(path) -> list[np.ndarray]:
    faces = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read landmarks {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            vals = [v for v in line.split(",") if v != ""]
            if len(vals) % 2 != 0:
                raise InputError(
                    f"{path}:{lineno}: odd number of coordinates ({len(vals)})"
                )
            try:
                flat = np.array([float(v) for v in vals], dtype=np.float64)
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
            faces.append(flat.reshape(-1, 2))
    return faces
