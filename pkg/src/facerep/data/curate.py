"""Streaming curation: score filtering plus uniform reservoir sampling.

The filter keeps records whose detector score strictly exceeds the
threshold; the score is the per-image maximum over detected faces, and
that policy is recorded in the output header. Sampling is single-pass
with memory bounded by the reservoir size.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from facerep.errors import InputError
from facerep.data.manifest import ManifestRecord, write_manifest

DEFAULT_THRESHOLD = 0.9
SCORE_POLICY = "max"


class Reservoir:
    """Uniform without-replacement sample of a stream (algorithm R).

    ``max_held`` records the peak number of items retained at any moment,
    so tests can verify the memory bound.
    """

    def __init__(self, capacity: int, rng: np.random.Generator):
        if capacity < 1:
            raise InputError("reservoir capacity must be positive")
        self.capacity = capacity
        self._rng = rng
        self.items: list = []
        self.seen = 0
        self.max_held = 0

    def offer(self, item) -> None:
        self.seen += 1
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            j = int(self._rng.integers(0, self.seen))
            if j < self.capacity:
                self.items[j] = item
        self.max_held = max(self.max_held, len(self.items))


@dataclass
class CurationStats:
    read: int = 0
    kept: int = 0
    below_threshold: int = 0
    rejected: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rejected[reason] = self.rejected.get(reason, 0) + 1


def curate_stream(
    lines: Iterable[str],
    target_size: int,
    seed: int,
    threshold: float = DEFAULT_THRESHOLD,
    rejects: TextIO | None = None,
) -> tuple[list[ManifestRecord], CurationStats]:
    """Filter and reservoir-sample manifest lines.

    Unreadable lines are skipped, counted by reason, and echoed to the
    ``rejects`` sink with the reason attached. When fewer records qualify
    than requested, all of them are returned with a warning.
    """
    if not (0.0 <= threshold <= 1.0):
        raise InputError(f"threshold must be in [0, 1], got {threshold}")
    if target_size < 1:
        raise InputError("target_size must be positive")
    rng = np.random.default_rng(seed)
    reservoir = Reservoir(target_size, rng)
    stats = CurationStats()
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        stats.read += 1
        try:
            record = ManifestRecord.from_json(line)
        except InputError as exc:
            reason = "parse_error" if "malformed" in str(exc) else "invalid_record"
            stats.reject(reason)
            if rejects is not None:
                rejects.write(json.dumps({"reason": reason, "line": line}) + "\n")
            continue
        if record.face_score > threshold:
            reservoir.offer(record)
        else:
            stats.below_threshold += 1
    stats.kept = len(reservoir.items)
    if stats.kept < target_size:
        warnings.warn(
            f"only {stats.kept} records exceeded threshold {threshold}; "
            f"requested {target_size}",
            stacklevel=2,
        )
    return reservoir.items, stats


def curate_manifest(
    input_path,
    output_path,
    target_size: int,
    seed: int,
    threshold: float = DEFAULT_THRESHOLD,
    rejects_path=None,
) -> CurationStats:
    """File-to-file curation; writes a header describing the run."""
    try:
        fh = open(input_path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read manifest {input_path}: {exc}") from exc
    with fh:
        if rejects_path is not None:
            with open(rejects_path, "w", encoding="utf-8") as rj:
                records, stats = curate_stream(fh, target_size, seed, threshold, rj)
        else:
            records, stats = curate_stream(fh, target_size, seed, threshold)
    header = {
        "threshold": threshold,
        "score_policy": SCORE_POLICY,
        "seed": seed,
        "count": len(records),
    }
    write_manifest(output_path, records, header)
    return stats
