"""Encoder backends.

``deterministic:<dim>`` is a self-contained reference encoder whose outputs
are a pure function of the input (text string, or crop pixel content): it
hashes the input into a seed and draws a fixed pseudo-random unit vector.
It stands in for a pretrained vision-language encoder in offline and test
environments while exercising the full export path.

``clip:<huggingface-id>`` runs a real CLIP checkpoint when the transformers
library and the weights are available; otherwise it raises ModelLoadFailure.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import EncodingFailure, ModelLoadFailure


class DeterministicEncoder:
    """Hash-seeded pseudo-random unit embeddings; text and image share a dim."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ModelLoadFailure(f"invalid embedding width {dim}")
        self.dim = dim
        self.preprocessing = "crop resized to 16x16 grayscale, row-major bytes"

    def _vector(self, payload: bytes) -> np.ndarray:
        digest = hashlib.blake2b(payload, digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        v = rng.standard_normal(self.dim)
        n = np.linalg.norm(v)
        if n == 0.0:
            raise EncodingFailure("degenerate embedding draw")
        return v / n

    def encode_text(self, prompts) -> np.ndarray:
        return np.stack([
            self._vector(b"text\x00" + p.encode("utf-8")) for p in prompts
        ])

    def encode_images(self, crops) -> np.ndarray:
        """``crops`` are float arrays (H, W) or (H, W, C) in [0, 255]."""
        rows = []
        for crop in crops:
            gray = np.asarray(crop, dtype=np.float64)
            if gray.ndim == 3:
                gray = gray.mean(axis=2)
            # Nearest-neighbor resize to the fixed preprocessing grid.
            h, w = gray.shape
            yi = np.minimum((np.arange(16) * h) // 16, h - 1)
            xi = np.minimum((np.arange(16) * w) // 16, w - 1)
            patch = gray[np.ix_(yi, xi)]
            payload = b"image\x00" + np.uint8(np.clip(patch, 0, 255)).tobytes()
            rows.append(self._vector(payload))
        return np.stack(rows)


class ClipEncoder:
    """Thin adapter over a huggingface CLIP checkpoint."""

    def __init__(self, model_id: str):
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelLoadFailure(f"transformers/torch unavailable: {exc}") from exc
        try:
            self.model = CLIPModel.from_pretrained(model_id)
            self.processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:  # weights missing, network down, bad id
            raise ModelLoadFailure(f"cannot load {model_id!r}: {exc}") from exc
        self.dim = int(self.model.config.projection_dim)
        self.preprocessing = f"CLIPProcessor defaults for {model_id}"

    def encode_text(self, prompts) -> np.ndarray:
        import torch

        with torch.no_grad():
            inputs = self.processor(text=list(prompts), return_tensors="pt",
                                    padding=True, truncation=True)
            out = self.model.get_text_features(**inputs)
        return out.numpy().astype(np.float64)

    def encode_images(self, crops) -> np.ndarray:
        import torch
        from PIL import Image

        images = [Image.fromarray(np.uint8(np.clip(c, 0, 255))) for c in crops]
        with torch.no_grad():
            inputs = self.processor(images=images, return_tensors="pt")
            out = self.model.get_image_features(**inputs)
        return out.numpy().astype(np.float64)


def load_encoder(model_id: str):
    """``deterministic:<dim>`` or ``clip:<huggingface-id>``."""
    kind, _, arg = model_id.partition(":")
    if kind == "deterministic":
        try:
            dim = int(arg)
        except ValueError as exc:
            raise ModelLoadFailure(
                f"bad deterministic encoder width {arg!r}"
            ) from exc
        return DeterministicEncoder(dim)
    if kind == "clip":
        return ClipEncoder(arg)
    raise ModelLoadFailure(f"unknown encoder {model_id!r}")
