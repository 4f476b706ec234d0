"""K-means clustering of entity embeddings into super entities.

Lloyd iterations with k-means++ seeding; tiny problems are solved exactly by
enumerating set partitions so micro-scale results are globally optimal.  The
SSE is measured after each assignment step, which makes it non-increasing
across iterations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import _kernels
from .embedding_store import EmbeddingMatrix
from .errors import IoFailure, MalformedHeader, NameCountMismatch, TooManyClusters

# Upper bound on m**count below which the exact enumeration solver runs.
_EXACT_LIMIT = 20_000


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray          # (count,) int64 centroid indices
    centroids: np.ndarray       # (m, d)
    sse: float
    sse_history: tuple[float, ...]
    n_iter: int


@dataclass(frozen=True)
class PrePartition:
    """Externally supplied disjoint entity groups (e.g. from POS tagging)."""

    groups: tuple[frozenset[str], ...]

    @classmethod
    def from_groups(cls, groups) -> "PrePartition":
        sets = tuple(frozenset(g) for g in groups)
        seen: set[str] = set()
        for g in sets:
            if seen & g:
                raise MalformedHeader("pre-partition groups overlap")
            seen |= g
        return cls(sets)

    @classmethod
    def load(cls, path) -> "PrePartition":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls.from_groups(doc["groups"])


@dataclass(frozen=True)
class SuperEntityMap:
    super_names: tuple[str, ...]
    assignment: dict[str, int]       # entity name -> super index
    centroids: np.ndarray | None = None

    def __post_init__(self):
        c = len(self.super_names)
        if len(set(self.super_names)) != c:
            raise NameCountMismatch("super-entity names are not unique")
        used = set(self.assignment.values())
        if any(i < 0 or i >= c for i in used):
            raise MalformedHeader("assignment references an out-of-range super index")
        if used != set(range(c)):
            raise MalformedHeader("some super entity has no members")

    @property
    def count(self) -> int:
        return len(self.super_names)

    def members(self, index: int) -> list[str]:
        return sorted(e for e, i in self.assignment.items() if i == index)

    def super_of(self, entity: str) -> str:
        return self.super_names[self.assignment[entity]]

    def save(self, path) -> None:
        doc = {"super_names": list(self.super_names), "assignment": self.assignment}
        try:
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=1, sort_keys=True)
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc

    @classmethod
    def load(cls, path) -> "SuperEntityMap":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls(
            tuple(doc["super_names"]),
            {str(k): int(v) for k, v in doc["assignment"].items()},
        )


def _points_of(points) -> np.ndarray:
    if isinstance(points, EmbeddingMatrix):
        return np.asarray(points.data, dtype=np.float64)
    return np.ascontiguousarray(points, dtype=np.float64)


def _kmeanspp_init(x: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.einsum("ij,ij->i", x - x[chosen[0]], x - x[chosen[0]])
    for _ in range(1, m):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        nd2 = np.einsum("ij,ij->i", x - x[idx], x - x[idx])
        np.minimum(d2, nd2, out=d2)
    return x[chosen].copy()


def _partitions(n: int, m: int):
    """Canonical assignments (restricted growth strings) using all m labels."""
    for assign in product(range(m), repeat=n):
        top = -1
        ok = True
        for a in assign:
            if a > top + 1:
                ok = False
                break
            top = max(top, a)
        if ok and top == m - 1:
            yield assign


def _exact_centroids(x: np.ndarray, labels: np.ndarray, m: int) -> np.ndarray:
    cents = np.empty((m, x.shape[1]), dtype=np.float64)
    for j in range(m):
        cents[j] = x[labels == j].mean(axis=0)
    return cents


def _solve_exact(x: np.ndarray, m: int) -> np.ndarray:
    """Centroids of the globally SSE-optimal partition (tiny inputs only)."""
    best_sse = np.inf
    best = None
    for assign in _partitions(x.shape[0], m):
        labels = np.asarray(assign, dtype=np.int64)
        cents = _exact_centroids(x, labels, m)
        diff = x - cents[labels]
        sse = float(np.einsum("ij,ij->", diff, diff))
        if sse < best_sse:
            best_sse = sse
            best = cents
    return best


def _repair_empty(x, centroids, labels, m):
    """Reseed empty centroids at the point farthest from its own centroid."""
    changed = False
    for _ in range(m):
        empties = np.flatnonzero(np.bincount(labels, minlength=m) == 0)
        if empties.size == 0:
            break
        diff = x - centroids[labels]
        far = int(np.argmax(np.einsum("ij,ij->i", diff, diff)))
        centroids[int(empties[0])] = x[far]
        labels, _ = _kernels.assign_clusters(x, centroids)
        changed = True
    return centroids, labels, changed


def kmeans(points, m: int, seed: int = 0, max_iter: int = 100,
           tol: float = 1e-6) -> KMeansResult:
    """Cluster rows of ``points`` into ``m`` groups, deterministically per seed."""
    x = _points_of(points)
    n = x.shape[0]
    if m < 1:
        raise TooManyClusters("m must be positive")
    if m > n:
        raise TooManyClusters(f"m={m} exceeds point count {n}")

    if m ** n <= _EXACT_LIMIT:
        centroids = _solve_exact(x, m)
    else:
        rng = np.random.default_rng(seed)
        centroids = _kmeanspp_init(x, m, rng)

    history: list[float] = []
    labels, sse = _kernels.assign_clusters(x, centroids)
    it = 0
    while True:
        centroids, labels, changed = _repair_empty(x, centroids, labels, m)
        if changed:
            _, sse = _kernels.assign_clusters(x, centroids)
        history.append(sse)
        it += 1
        if it >= max_iter:
            break
        if len(history) >= 2 and history[-2] - history[-1] < tol:
            break
        centroids = _exact_centroids(x, labels, m)
        labels, sse = _kernels.assign_clusters(x, centroids)

    return KMeansResult(labels, centroids, history[-1], tuple(history), it)


def _apportion(sizes: list[int], m: int) -> list[int]:
    """Largest-remainder apportionment of m clusters, >=1 per nonempty group."""
    total = sum(sizes)
    if len(sizes) > m:
        raise TooManyClusters(
            f"{len(sizes)} pre-partition groups but only m={m} clusters"
        )
    quotas = [s * m / total for s in sizes]
    counts = [max(1, int(q)) for q in quotas]
    counts = [min(c, s) for c, s in zip(counts, sizes)]
    # Adjust to the exact total, preferring the largest fractional remainders.
    order = sorted(range(len(sizes)), key=lambda i: (quotas[i] - int(quotas[i])),
                   reverse=True)
    k = 0
    while sum(counts) < m:
        i = order[k % len(order)]
        if counts[i] < sizes[i]:
            counts[i] += 1
        k += 1
    k = 0
    while sum(counts) > m:
        i = order[::-1][k % len(order)]
        if counts[i] > 1:
            counts[i] -= 1
        k += 1
    return counts


def build_super_map(entity_emb: EmbeddingMatrix, m: int, names,
                    pre_partition: PrePartition | None = None,
                    seed: int = 0) -> SuperEntityMap:
    """Cluster the entity vocabulary and attach super names in centroid order."""
    names = list(names)
    if len(names) != m:
        raise NameCountMismatch(f"{len(names)} names for m={m} clusters")
    entities = list(entity_emb.labels)
    if m > len(entities):
        raise TooManyClusters(f"m={m} exceeds vocabulary size {len(entities)}")

    if pre_partition is None:
        result = kmeans(entity_emb, m, seed=seed)
        assignment = {e: int(result.labels[i]) for i, e in enumerate(entities)}
        centroids = result.centroids
    else:
        grouped = [sorted(g & set(entities)) for g in pre_partition.groups]
        grouped = [g for g in grouped if g]
        leftover = sorted(set(entities) - {e for g in grouped for e in g})
        if leftover:
            grouped.append(leftover)
        counts = _apportion([len(g) for g in grouped], m)
        assignment = {}
        blocks = []
        offset = 0
        for group, gm in zip(grouped, counts):
            rows = np.asarray([entity_emb.row(e) for e in group])
            result = kmeans(rows, gm, seed=seed + offset)
            for i, e in enumerate(group):
                assignment[e] = offset + int(result.labels[i])
            blocks.append(result.centroids)
            offset += gm
        centroids = np.vstack(blocks)

    return SuperEntityMap(tuple(names), assignment, centroids)
