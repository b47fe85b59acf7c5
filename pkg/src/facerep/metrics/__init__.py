"""Benchmark metrics: segmentation F1, landmark NME/FR/AUC, attribute accuracy."""

from facerep.metrics.segmentation import ConfusionAccumulator, f1_scores
from facerep.metrics.landmarks import (
    CEDCurve,
    auc_ced,
    box_normalizer,
    diag_normalizer,
    failure_rate,
    inter_ocular_normalizer,
    nme,
)
from facerep.metrics.attributes import group_discrepancy, mean_accuracy
from facerep.metrics.report import MetricReport, format_report

__all__ = [
    "CEDCurve",
    "ConfusionAccumulator",
    "MetricReport",
    "auc_ced",
    "box_normalizer",
    "diag_normalizer",
    "f1_scores",
    "failure_rate",
    "format_report",
    "group_discrepancy",
    "inter_ocular_normalizer",
    "mean_accuracy",
    "nme",
]
