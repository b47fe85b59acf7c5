"""Aggregated metric report with text-table and JSON-ready forms."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from facerep.errors import InputError


def _check_percent(name: str, value: float) -> None:
    if not math.isnan(value) and not (0.0 <= value <= 100.0):
        raise InputError(f"{name} must be a percentage in [0, 100], got {value}")


@dataclass
class MetricReport:
    """Holds whichever metric families a run produced; unused ones stay None.

    NME values are raw ratios; every other numeric field is a percent.
    ``failure_rate`` and ``auc`` are keyed by their threshold formatted with
    ``%g``. ``notes`` carries convention flags such as the box-normalizer
    choice.
    """

    per_class_f1: list[float | None] | None = None
    mean_f1: float | None = None
    nme: dict[str, float] | None = None
    failure_rate: dict[str, float] | None = None
    auc: dict[str, float] | None = None
    mean_attr_accuracy: float | None = None
    group_accuracy: dict[str, float] | None = None
    group_count: dict[str, int] | None = None
    group_discrepancy: float | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.per_class_f1 is not None:
            for i, v in enumerate(self.per_class_f1):
                if v is not None:
                    _check_percent(f"per_class_f1[{i}]", v)
        if self.mean_f1 is not None:
            _check_percent("mean_f1", self.mean_f1)
        if self.nme is not None:
            for k, v in self.nme.items():
                if v < 0:
                    raise InputError(f"nme[{k}] must be non-negative, got {v}")
        for fam_name, fam in (("failure_rate", self.failure_rate), ("auc", self.auc)):
            if fam is not None:
                for k, v in fam.items():
                    _check_percent(f"{fam_name}[{k}]", v)
        if self.mean_attr_accuracy is not None:
            _check_percent("mean_attr_accuracy", self.mean_attr_accuracy)
        if self.group_accuracy is not None:
            for k, v in self.group_accuracy.items():
                _check_percent(f"group_accuracy[{k}]", v)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        return cls(**data)


def format_report(report: MetricReport) -> str:
    """Render the populated sections as aligned text tables."""
    lines: list[str] = []
    for note in report.notes:
        lines.append(f"# {note}")
    if report.per_class_f1 is not None:
        lines.append("F1 per class (%):")
        cells = [
            "   -  " if v is None else f"{v:6.2f}" for v in report.per_class_f1
        ]
        lines.append("  " + " ".join(cells))
    if report.mean_f1 is not None:
        lines.append(f"F1 mean (%): {report.mean_f1:.2f}")
    if report.nme:
        for key in sorted(report.nme):
            lines.append(f"NME_{key}: {report.nme[key]:.5f}")
    if report.failure_rate:
        for key in sorted(report.failure_rate):
            lines.append(f"FR@{key}: {report.failure_rate[key]:.2f}%")
    if report.auc:
        for key in sorted(report.auc):
            lines.append(f"AUC@{key}: {report.auc[key]:.2f}")
    if report.mean_attr_accuracy is not None:
        lines.append(f"mAcc (%): {report.mean_attr_accuracy:.2f}")
    if report.group_accuracy:
        lines.append("Group accuracy (%):")
        for key in sorted(report.group_accuracy):
            count = ""
            if report.group_count and key in report.group_count:
                count = f"  (n={report.group_count[key]})"
            lines.append(f"  {key}: {report.group_accuracy[key]:.2f}{count}")
    if report.group_discrepancy is not None:
        lines.append(f"Group discrepancy: {report.group_discrepancy:+.2f}")
    if not lines:
        lines.append("(empty report)")
    return "\n".join(lines) + "\n"
