"""Deterministic sampling: face choice, few-shot subsets, ratio mixing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from facerep.errors import InputError
from facerep.data.manifest import ManifestRecord


def select_face(record: ManifestRecord, rng: np.random.Generator) -> np.ndarray:
    """Pick one face uniformly from a record's detections."""
    if record.face_count < 1:
        raise InputError(f"record '{record.image_ref}' has no faces")
    idx = int(rng.integers(record.face_count))
    return record.faces[idx]


@dataclass
class DatasetSplit:
    """An ordered record list plus the sampling provenance that produced it."""

    records: list = field(default_factory=list)
    seed: int | None = None
    fraction: float = 1.0

    def __len__(self) -> int:
        return len(self.records)


def fewshot_subset(split: DatasetSplit, fraction: float, seed: int) -> DatasetSplit:
    """Uniform subset of floor(fraction * n) records, at least one.

    Original record order is preserved so repeated subsetting composes
    predictably.
    """
    if not (0.0 < fraction <= 1.0):
        raise InputError(f"fraction must be in (0, 1], got {fraction}")
    n = len(split.records)
    if n == 0:
        raise InputError("parent split is empty")
    if fraction == 1.0:
        return DatasetSplit(records=list(split.records), seed=seed, fraction=1.0)
    k = max(1, int(np.floor(fraction * n)))
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=k, replace=False))
    return DatasetSplit(
        records=[split.records[i] for i in idx], seed=seed, fraction=fraction
    )


def mix_face_ratio(
    face_records: list,
    nonface_records: list,
    ratio: float,
    size: int,
    seed: int,
) -> list:
    """Blend the two sources at the given face fraction, then shuffle.

    The face share is round(ratio * size) with ties rounded up.
    """
    if not (0.0 <= ratio <= 1.0):
        raise InputError(f"ratio must be in [0, 1], got {ratio}")
    if size < 1:
        raise InputError("size must be positive")
    n_face = int(np.floor(ratio * size + 0.5))
    n_nonface = size - n_face
    if n_face > len(face_records):
        raise InputError(
            f"face source has {len(face_records)} records, need {n_face}"
        )
    if n_nonface > len(nonface_records):
        raise InputError(
            f"non-face source has {len(nonface_records)} records, need {n_nonface}"
        )
    rng = np.random.default_rng(seed)
    face_idx = rng.choice(len(face_records), size=n_face, replace=False)
    nonface_idx = rng.choice(len(nonface_records), size=n_nonface, replace=False)
    mixed = [face_records[i] for i in face_idx]
    mixed.extend(nonface_records[i] for i in nonface_idx)
    order = rng.permutation(size)
    return [mixed[i] for i in order]
