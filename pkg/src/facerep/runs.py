"""Run artifacts: a serialized record of what a command did.

Reports are byte-stable under the determinism flag: keys are sorted and the
wall clock, the only nondeterministic field, is withheld.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass

from facerep.errors import InputError


@dataclass
class RunReport:
    command: str
    seed: int
    config: dict
    checkpoint_sha256: str | None = None
    metrics: dict | None = None
    wall_clock_seconds: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed run report: {exc}") from exc
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise InputError(f"unknown run report fields: {sorted(unknown)}")
        if "command" not in data or "seed" not in data or "config" not in data:
            raise InputError("run report requires command, seed, and config")
        return cls(**data)


def write_report(report: RunReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")


def read_report(path) -> RunReport:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return RunReport.from_json(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read run report {path}: {exc}") from exc


@contextmanager
def wall_clock(deterministic: bool):
    """Yields a dict whose ``seconds`` entry is filled unless deterministic."""
    holder: dict = {"seconds": None}
    start = time.monotonic()
    try:
        yield holder
    finally:
        if not deterministic:
            holder["seconds"] = time.monotonic() - start
