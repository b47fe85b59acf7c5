"""Manifest I/O, curation, and sampling for image-text training data."""

from facerep.data.manifest import (
    ManifestRecord,
    iter_manifest,
    read_manifest,
    write_manifest,
)
from facerep.data.curate import CurationStats, Reservoir, curate_manifest, curate_stream
from facerep.data.sampling import (
    DatasetSplit,
    fewshot_subset,
    mix_face_ratio,
    select_face,
)
from facerep.data.images import (
    load_image,
    load_label_map,
    save_image,
    save_label_map,
)

__all__ = [
    "CurationStats",
    "DatasetSplit",
    "ManifestRecord",
    "Reservoir",
    "curate_manifest",
    "curate_stream",
    "fewshot_subset",
    "iter_manifest",
    "load_image",
    "load_label_map",
    "mix_face_ratio",
    "read_manifest",
    "save_image",
    "save_label_map",
    "select_face",
    "write_manifest",
]
