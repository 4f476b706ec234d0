"""Writer/reader for the scoring engine's binary embedding format.

This is an independent implementation against the published format contract
(it shares no code with the engine): magic ``RAHPEMB1``, little-endian u16
version=1, u8 flags (bit 0 = normalized), u8 reserved=0, u32 dim, u32 count,
``count*dim`` float32 values row-major, u32 trailer length, then a UTF-8 JSON
trailer ``{"labels": [...]}``.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ManifestError

MAGIC = b"RAHPEMB1"
VERSION = 1
_NORM_TOL = 1e-5


def write_embeddings(path, labels, vectors, normalized: bool) -> None:
    """Validate rows against the format's load invariants and write the file."""
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or vectors.shape[1] < 1:
        raise ManifestError(f"expected 2-D vectors, got shape {vectors.shape}")
    labels = [str(x) for x in labels]
    if len(labels) != vectors.shape[0]:
        raise ManifestError(
            f"{len(labels)} labels for {vectors.shape[0]} rows"
        )
    if len(set(labels)) != len(labels):
        dup = next(x for x in labels if labels.count(x) > 1)
        raise ManifestError(f"duplicate label {dup!r}")
    if not np.isfinite(vectors).all():
        raise ManifestError("vectors contain NaN or Inf")
    norms = np.linalg.norm(np.float64(vectors), axis=1)
    if (norms == 0.0).any():
        raise ManifestError("a vector is all zeros")
    if normalized and vectors.shape[0] and np.abs(norms - 1.0).max() > _NORM_TOL:
        raise ManifestError("normalized flag set but a row is not unit norm")

    trailer = json.dumps({"labels": labels}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HBBII", VERSION, int(bool(normalized)), 0,
                             vectors.shape[1], vectors.shape[0]))
        fh.write(vectors.astype("<f4").tobytes())
        fh.write(struct.pack("<I", len(trailer)))
        fh.write(trailer)


def read_embeddings(path):
    """Returns (labels, float64 vectors, normalized flag)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 20 or blob[:8] != MAGIC:
        raise ManifestError(f"{path}: not an embedding file")
    version, flags, _, dim, count = struct.unpack_from("<HBBII", blob, 8)
    if version != VERSION:
        raise ManifestError(f"{path}: unsupported version {version}")
    data = np.frombuffer(blob, dtype="<f4", count=dim * count, offset=20)
    body_end = 20 + 4 * dim * count
    (tlen,) = struct.unpack_from("<I", blob, body_end)
    labels = json.loads(blob[body_end + 4: body_end + 4 + tlen])["labels"]
    return labels, np.float64(data.reshape(count, dim)), bool(flags & 1)
