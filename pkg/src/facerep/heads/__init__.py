"""Task heads reading multi-level backbone features."""

from facerep.heads.fusion import (
    PyramidFusion,
    select_features,
    to_spatial,
    validate_tap_layers,
)
from facerep.heads.parsing import DEFAULT_TAP_LAYERS, ParsingHead, parsing_loss
from facerep.heads.alignment import (
    HEATMAP_SIZE,
    AlignmentHead,
    soft_label_ce,
)
from facerep.heads.attributes import AttributeHead, attribute_loss, pooled_vectors
from facerep.heads.training import (
    ALIGNMENT_TRAIN,
    ATTRIBUTE_TRAIN,
    PARSING_TRAIN,
    HeadTrainConfig,
    HeadTrainResult,
    backbone_features,
    count_steps,
    epoch_batches,
    repeat_batches,
    train_head,
)

__all__ = [
    "ALIGNMENT_TRAIN",
    "ATTRIBUTE_TRAIN",
    "DEFAULT_TAP_LAYERS",
    "HEATMAP_SIZE",
    "PARSING_TRAIN",
    "AlignmentHead",
    "AttributeHead",
    "HeadTrainConfig",
    "HeadTrainResult",
    "ParsingHead",
    "PyramidFusion",
    "attribute_loss",
    "backbone_features",
    "count_steps",
    "epoch_batches",
    "parsing_loss",
    "pooled_vectors",
    "repeat_batches",
    "select_features",
    "soft_label_ce",
    "to_spatial",
    "train_head",
    "validate_tap_layers",
]
