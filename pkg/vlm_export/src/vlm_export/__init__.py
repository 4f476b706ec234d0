"""Embedding exporter: encodes prompt text and union image crops with a
vision-language encoder and writes them in the scoring engine's binary
embedding format, plus an independent cosine oracle for cross-checking.
"""

from .emb_format import read_embeddings, write_embeddings
from .encoders import ClipEncoder, DeterministicEncoder, load_encoder
from .errors import (
    DegenerateBox,
    EncodingFailure,
    ImageLoadFailure,
    ManifestError,
    ModelLoadFailure,
    VlmExportError,
)
from .export import (
    ExportManifest,
    export_text,
    export_union_crops,
    load_image,
    oracle_dump,
    union_box,
)

__version__ = "0.1.0"

__all__ = [
    "ClipEncoder",
    "DegenerateBox",
    "DeterministicEncoder",
    "EncodingFailure",
    "ExportManifest",
    "ImageLoadFailure",
    "ManifestError",
    "ModelLoadFailure",
    "VlmExportError",
    "export_text",
    "export_union_crops",
    "load_encoder",
    "load_image",
    "oracle_dump",
    "read_embeddings",
    "union_box",
    "write_embeddings",
    "__version__",
]
