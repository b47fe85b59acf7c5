"""Face geometry: similarity alignment, warping, and landmark heatmaps."""

from facerep.geometry.similarity import (
    apply_transform,
    augment_transform,
    compose,
    estimate_similarity,
    identity_transform,
    invert_transform,
    load_transform,
    resize_transform,
    save_transform,
)
from facerep.geometry.warp import (
    WarpConfig,
    inverse_tanh_warp,
    inverse_transform_points,
    tanh_warp,
    transform_points,
    warp_image,
    warp_label_map,
)
from facerep.geometry.heatmap import decode_heatmap, render_heatmap
from facerep.geometry.landmarks import load_landmarks, save_landmarks

__all__ = [
    "WarpConfig",
    "apply_transform",
    "augment_transform",
    "compose",
    "decode_heatmap",
    "estimate_similarity",
    "identity_transform",
    "inverse_tanh_warp",
    "inverse_transform_points",
    "invert_transform",
    "load_landmarks",
    "load_transform",
    "render_heatmap",
    "resize_transform",
    "save_landmarks",
    "save_transform",
    "tanh_warp",
    "transform_points",
    "warp_image",
    "warp_label_map",
]
