"""Input assembly: aligned face crops or random crops, plus caption tokens.

With alignment enabled, a similarity transform maps the record's five
landmark points onto a mean-face template scaled to the crop size.  Without
it, crops are taken at a random square region and resized, mirroring generic
contrastive pipelines.
"""

from __future__ import annotations

from importlib import resources

import numpy as np
import torch

from facerep.data.images import load_image
from facerep.data.manifest import ManifestRecord
from facerep.data.sampling import select_face
from facerep.encoders.tokenizer import TextTokenizer
from facerep.errors import InputError
from facerep.geometry.similarity import compose, estimate_similarity, resize_transform
from facerep.geometry.warp import WarpConfig, warp_image

_TEMPLATE_FILE = "mean_face_5pt.txt"


def load_mean_face_template() -> np.ndarray:
    """Five landmark points in unit coordinates, shipped with the package."""
    text = (
        resources.files("facerep.fixtures").joinpath(_TEMPLATE_FILE).read_text("utf-8")
    )
    rows = [line.split(",") for line in text.strip().splitlines()]
    template = np.array([[float(x), float(y)] for x, y in rows])
    if template.shape != (5, 2):
        raise InputError(f"template must hold 5 points, got shape {template.shape}")
    return template


def template_points(size: int, template: np.ndarray | None = None) -> np.ndarray:
    if size < 1:
        raise InputError(f"crop size must be positive, got {size}")
    base = load_mean_face_template() if template is None else template
    return base * float(size)


def align_face(
    image: np.ndarray,
    face_points: np.ndarray,
    out_size: int,
    warp: WarpConfig | None = None,
) -> np.ndarray:
    """Crop the face onto the template frame at ``out_size``."""
    t = estimate_similarity(face_points, template_points(out_size))
    return warp_image(image, t, out_size, warp)


def random_crop_resize(
    image: np.ndarray, out_size: int, rng: np.random.Generator
) -> np.ndarray:
    """Square crop at a random location and scale, resized to ``out_size``."""
    h, w = image.shape[0], image.shape[1]
    side = float(rng.uniform(0.5, 1.0)) * min(h, w)
    x0 = float(rng.uniform(0.0, w - side))
    y0 = float(rng.uniform(0.0, h - side))
    shift = np.array([[1.0, 0.0, -x0], [0.0, 1.0, -y0]])
    t = compose(resize_transform(side, out_size), shift)
    return warp_image(image, t, out_size)


def batch_tensor(crops: list[np.ndarray]) -> torch.Tensor:
    """Stack (H, W, 3) float crops into a (B, 3, H, W) float32 tensor."""
    if not crops:
        raise InputError("empty crop list")
    stacked = np.stack([np.clip(c, 0.0, 1.0) for c in crops])
    return torch.from_numpy(stacked).permute(0, 3, 1, 2).to(torch.float32).contiguous()


def caption_tensors(
    captions: list[str], tokenizer: TextTokenizer
) -> tuple[torch.Tensor, torch.Tensor]:
    ids, eos = tokenizer.tokenize_batch(captions)
    return torch.from_numpy(ids), torch.from_numpy(eos)


def prepare_pretrain_batch(
    records: list[ManifestRecord],
    images_dir,
    out_size: int,
    align: bool,
    rng: np.random.Generator,
    tokenizer: TextTokenizer,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Load, crop, and tokenize one batch of manifest records."""
    crops = []
    captions = []
    for record in records:
        image = load_image(f"{images_dir}/{record.image_ref}")
        if align:
            crops.append(align_face(image, select_face(record, rng), out_size))
        else:
            crops.append(random_crop_resize(image, out_size, rng))
        captions.append(record.caption)
    ids, eos = caption_tensors(captions, tokenizer)
    return batch_tensor(crops), ids, eos
