"""Labeled embedding matrices plus the cosine similarity primitive.

Disk formats
------------
binary: magic ``RAHPEMB1``, then little-endian u16 version=1, u8 flags
(bit0 = normalized), u8 reserved=0, u32 dim, u32 count, ``count*dim`` float32
values row-major, u32 trailer length, trailer bytes of UTF-8 JSON
``{"labels": [...]}``.

json: ``{"dim": D, "normalized": bool, "labels": [...], "vectors": [[...]]}``.

Data is float32 on disk and float64 in memory.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatch,
    DuplicateLabel,
    IoFailure,
    MalformedHeader,
    NonFiniteValue,
    ZeroVector,
)

_MAGIC = b"RAHPEMB1"
_VERSION = 1
_NORM_TOL = 1e-5


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Immutable labeled row-major matrix of d-dimensional vectors."""

    dim: int
    labels: tuple[str, ...]
    data: np.ndarray  # (count, dim) float64, read-only
    normalized: bool = False
    _index: dict[str, int] = field(repr=False, compare=False, default_factory=dict)

    @classmethod
    def create(cls, labels, data, normalized: bool = False) -> "EmbeddingMatrix":
        """Validate and build a matrix; raises on any invariant violation."""
        data = np.ascontiguousarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise DimensionMismatch(f"expected 2-D data, got shape {data.shape}")
        labels = tuple(str(x) for x in labels)
        if len(labels) != data.shape[0]:
            raise MalformedHeader(
                f"{len(labels)} labels for {data.shape[0]} rows"
            )
        if data.shape[1] < 1:
            raise DimensionMismatch("dim must be positive")
        if not np.isfinite(data).all():
            raise NonFiniteValue("matrix contains NaN or Inf entries")
        norms = np.linalg.norm(data, axis=1)
        if data.shape[0] and (zero := np.flatnonzero(norms == 0.0)).size:
            raise ZeroVector(f"row {zero[0]} ({labels[zero[0]]!r}) is all zeros")
        seen: dict[str, int] = {}
        for i, lab in enumerate(labels):
            if lab in seen:
                raise DuplicateLabel(f"label {lab!r} at rows {seen[lab]} and {i}")
            seen[lab] = i
        if normalized and data.shape[0] and np.abs(norms - 1.0).max() > _NORM_TOL:
            raise MalformedHeader(
                "normalized flag set but a row deviates from unit norm"
            )
        data.setflags(write=False)
        return cls(int(data.shape[1]), labels, data, bool(normalized), seen)

    @property
    def count(self) -> int:
        return self.data.shape[0]

    def row_index(self, label: str) -> int:
        return self._index[label]

    def row(self, label: str) -> np.ndarray:
        return self.data[self._index[label]]

    def __contains__(self, label: str) -> bool:
        return label in self._index


def cosine(a, b) -> float:
    """Cosine similarity a.b/(|a||b|), clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine of a zero vector is undefined")
    return float(min(1.0, max(-1.0, float(a @ b) / (na * nb))))


def similarity_matrix(rows: EmbeddingMatrix, cols: EmbeddingMatrix) -> np.ndarray:
    """Batched cosine: entry (i, j) = cosine(rows[i], cols[j])."""
    if rows.dim != cols.dim:
        raise DimensionMismatch(f"dims {rows.dim} and {cols.dim}")
    return _kernels.cosine_matrix(rows.data, cols.data)


def load_embeddings(path, format: str = "binary") -> EmbeddingMatrix:
    if format == "binary":
        return _load_binary(path)
    if format == "json":
        return _load_json(path)
    raise ValueError(f"unknown format {format!r}")


def save_embeddings(m: EmbeddingMatrix, path, format: str = "binary") -> None:
    try:
        if format == "binary":
            _save_binary(m, path)
        elif format == "json":
            _save_json(m, path)
        else:
            raise ValueError(f"unknown format {format!r}")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _load_binary(path) -> EmbeddingMatrix:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(blob) < 20 or blob[:8] != _MAGIC:
        raise MalformedHeader(f"{path}: bad magic bytes")
    version, flags, reserved, dim, count = struct.unpack_from("<HBBII", blob, 8)
    if version != _VERSION:
        raise MalformedHeader(f"{path}: unsupported version {version}")
    if reserved != 0:
        raise MalformedHeader(f"{path}: reserved byte is {reserved}")
    body_end = 20 + 4 * dim * count
    if len(blob) < body_end + 4:
        raise MalformedHeader(f"{path}: truncated body")
    data = np.frombuffer(blob, dtype="<f4", count=dim * count, offset=20)
    (trailer_len,) = struct.unpack_from("<I", blob, body_end)
    trailer = blob[body_end + 4 : body_end + 4 + trailer_len]
    if len(trailer) != trailer_len:
        raise MalformedHeader(f"{path}: truncated trailer")
    try:
        labels = json.loads(trailer.decode("utf-8"))["labels"]
    except (ValueError, KeyError) as exc:
        raise MalformedHeader(f"{path}: unreadable trailer: {exc}") from exc
    if len(labels) != count:
        raise MalformedHeader(
            f"{path}: trailer declares {len(labels)} labels for {count} rows"
        )
    return EmbeddingMatrix.create(
        labels, data.reshape(count, dim), normalized=bool(flags & 1)
    )


def _save_binary(m: EmbeddingMatrix, path) -> None:
    trailer = json.dumps({"labels": list(m.labels)}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HBBII", _VERSION, int(m.normalized), 0, m.dim, m.count))
        fh.write(np.ascontiguousarray(m.data, dtype="<f4").tobytes())
        fh.write(struct.pack("<I", len(trailer)))
        fh.write(trailer)


def _load_json(path) -> EmbeddingMatrix:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise MalformedHeader(f"{path}: invalid JSON: {exc}") from exc
    try:
        dim = int(doc["dim"])
        labels = doc["labels"]
        vectors = doc["vectors"]
        normalized = bool(doc.get("normalized", False))
    except (KeyError, TypeError) as exc:
        raise MalformedHeader(f"{path}: missing field: {exc}") from exc
    if len(labels) != len(vectors):
        raise MalformedHeader(
            f"{path}: {len(labels)} labels for {len(vectors)} vectors"
        )
    for i, vec in enumerate(vectors):
        if len(vec) != dim:
            raise DimensionMismatch(f"{path}: row {i} has length {len(vec)}, not {dim}")
    data = np.asarray(vectors, dtype=np.float64).reshape(len(vectors), dim)
    return EmbeddingMatrix.create(labels, data, normalized=normalized)


def _save_json(m: EmbeddingMatrix, path) -> None:
    doc = {
        "dim": m.dim,
        "normalized": m.normalized,
        "labels": list(m.labels),
        "vectors": [[float(x) for x in row] for row in m.data],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
