"""Export operations: prompt-text embeddings, union-crop image embeddings,
and independent cosine oracle dumps.

Manifest (JSON):
  {"model": "deterministic:512", "normalize": true, "output": "out.bin",
   "prompts": ["...", ...]}                         # text export
  {"model": ..., "normalize": ..., "output": ...,
   "crops": [{"image": "img.npy",
              "subj_box": [x1, y1, x2, y2],
              "obj_box":  [x1, y1, x2, y2]}, ...]}  # union-crop export
  {"text_file": "t.bin", "image_file": "u.bin", "output": "o.json",
   "pairs": [["<text label>", "<image label>"], ...]}  # oracle dump
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .emb_format import read_embeddings, write_embeddings
from .encoders import load_encoder
from .errors import DegenerateBox, EncodingFailure, ImageLoadFailure, ManifestError


@dataclass(frozen=True)
class ExportManifest:
    model: str
    normalize: bool
    output: str
    prompts: tuple[str, ...] = ()
    crops: tuple[dict, ...] = ()

    @classmethod
    def load(cls, path) -> "ExportManifest":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc) -> "ExportManifest":
        try:
            manifest = cls(
                str(doc["model"]),
                bool(doc.get("normalize", True)),
                str(doc["output"]),
                tuple(str(p) for p in doc.get("prompts", [])),
                tuple(doc.get("crops", [])),
            )
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"manifest missing field: {exc}") from exc
        if not manifest.prompts and not manifest.crops:
            raise ManifestError("manifest has neither prompts nor crops")
        return manifest


def union_box(subj, obj):
    """Smallest box containing both boxes: componentwise min/max."""
    return (
        min(subj[0], obj[0]), min(subj[1], obj[1]),
        max(subj[2], obj[2]), max(subj[3], obj[3]),
    )


def _check_box(box, width, height, name):
    if len(box) != 4 or not all(math.isfinite(float(v)) for v in box):
        raise DegenerateBox(f"{name}: malformed box {box!r}")
    x1, y1, x2, y2 = (float(v) for v in box)
    if x2 <= x1 or y2 <= y1:
        raise DegenerateBox(f"{name}: box {box!r} has non-positive extent")
    if x1 < 0 or y1 < 0 or x2 > width or y2 > height:
        raise DegenerateBox(
            f"{name}: box {box!r} exceeds image bounds {width}x{height}"
        )
    return x1, y1, x2, y2


def load_image(path) -> np.ndarray:
    """(H, W) or (H, W, C) float array; .npy directly, anything else via PIL."""
    path = Path(path)
    try:
        if path.suffix == ".npy":
            arr = np.load(path)
        else:
            from PIL import Image

            with Image.open(path) as img:
                arr = np.asarray(img)
    except Exception as exc:
        raise ImageLoadFailure(f"cannot load image {path}: {exc}") from exc
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim not in (2, 3) or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageLoadFailure(f"{path}: unsupported image shape {arr.shape}")
    return arr


def _maybe_normalize(vectors: np.ndarray, normalize: bool) -> np.ndarray:
    if not normalize:
        return vectors
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if (norms == 0.0).any():
        raise EncodingFailure("cannot normalize a zero embedding")
    return vectors / norms


def export_text(manifest: ExportManifest) -> dict:
    """One row per prompt, labeled with the exact prompt string."""
    if not manifest.prompts:
        raise ManifestError("text export needs a non-empty prompt list")
    labels = list(manifest.prompts)
    if len(set(labels)) != len(labels):
        dup = next(x for x in labels if labels.count(x) > 1)
        raise ManifestError(f"duplicate prompt {dup!r}")
    encoder = load_encoder(manifest.model)
    vectors = _maybe_normalize(
        np.asarray(encoder.encode_text(labels), dtype=np.float64),
        manifest.normalize,
    )
    write_embeddings(manifest.output, labels, vectors, manifest.normalize)
    return {
        "output": manifest.output,
        "count": len(labels),
        "dim": encoder.dim,
        "model": manifest.model,
        "preprocessing": encoder.preprocessing,
    }


def export_union_crops(manifest: ExportManifest) -> dict:
    """One row per crop, labeled ``<image>#<i>`` in manifest order."""
    if not manifest.crops:
        raise ManifestError("crop export needs a non-empty crop list")
    encoder = load_encoder(manifest.model)
    labels = []
    crops = []
    unions = []
    for i, spec in enumerate(manifest.crops):
        try:
            image_path = spec["image"]
            subj, obj = spec["subj_box"], spec["obj_box"]
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"crop {i}: missing field {exc}") from exc
        arr = load_image(image_path)
        h, w = arr.shape[0], arr.shape[1]
        _check_box(subj, w, h, f"crop {i} subj_box")
        _check_box(obj, w, h, f"crop {i} obj_box")
        x1, y1, x2, y2 = union_box(
            [float(v) for v in subj], [float(v) for v in obj]
        )
        crop = arr[int(math.floor(y1)): int(math.ceil(y2)),
                   int(math.floor(x1)): int(math.ceil(x2))]
        labels.append(f"{Path(image_path).name}#{i}")
        crops.append(crop)
        unions.append([x1, y1, x2, y2])
    vectors = _maybe_normalize(
        np.asarray(encoder.encode_images(crops), dtype=np.float64),
        manifest.normalize,
    )
    write_embeddings(manifest.output, labels, vectors, manifest.normalize)
    return {
        "output": manifest.output,
        "count": len(labels),
        "dim": encoder.dim,
        "model": manifest.model,
        "preprocessing": encoder.preprocessing,
        "union_boxes": unions,
    }


def _independent_cosine(a, b) -> float:
    """Scalar-loop cosine; deliberately shares nothing with the engine."""
    dot = na = nb = 0.0
    for x, y in zip(a, b):
        dot += float(x) * float(y)
        na += float(x) * float(x)
        nb += float(y) * float(y)
    if na == 0.0 or nb == 0.0:
        raise EncodingFailure("cosine of a zero vector")
    return max(-1.0, min(1.0, dot / math.sqrt(na) / math.sqrt(nb)))


def oracle_dump(text_file, image_file, pairs) -> list[dict]:
    """Cosine similarities for (text label, image label) pairs."""
    t_labels, t_vecs, _ = read_embeddings(text_file)
    i_labels, i_vecs, _ = read_embeddings(image_file)
    t_index = {lab: k for k, lab in enumerate(t_labels)}
    i_index = {lab: k for k, lab in enumerate(i_labels)}
    out = []
    for t_lab, i_lab in pairs:
        if t_lab not in t_index:
            raise ManifestError(f"text label {t_lab!r} not in {text_file}")
        if i_lab not in i_index:
            raise ManifestError(f"image label {i_lab!r} not in {image_file}")
        out.append({
            "text": t_lab,
            "image": i_lab,
            "cosine": _independent_cosine(
                t_vecs[t_index[t_lab]], i_vecs[i_index[i_lab]]
            ),
        })
    return out
