"""Text-conditioned saliency for the image tower."""

from facerep.saliency.gradcam import (
    SaliencyMap,
    gradcam,
    save_overlay,
    save_saliency_grid,
    staged_image_forward,
)

__all__ = [
    "SaliencyMap",
    "gradcam",
    "save_overlay",
    "save_saliency_grid",
    "staged_image_forward",
]
