"""Pure-numpy kernel implementations (fallback backend).

The compiled backend in ``_fast.pyx`` mirrors these signatures exactly; both
operate on float64 C-contiguous arrays and are single-threaded so results do
not depend on worker count.
"""

import numpy as np

NAME = "numpy"


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity between rows of ``a`` (n,d) and ``b`` (m,d)."""
    na = np.sqrt(np.einsum("ij,ij->i", a, a))
    nb = np.sqrt(np.einsum("ij,ij->i", b, b))
    out = a @ b.T
    out /= na[:, None]
    out /= nb[None, :]
    np.clip(out, -1.0, 1.0, out=out)
    return out


def assign_clusters(points: np.ndarray, centroids: np.ndarray):
    """Nearest-centroid assignment.

    Returns ``(labels, sse)`` where ties go to the lowest centroid index and
    ``sse`` is the total squared distance of every point to its assigned
    centroid, accumulated in point order.
    """
    # ||x-c||^2 expansion for the argmin, exact re-computation for the SSE so
    # the reported objective is not polluted by cancellation error.
    sq = (
        np.einsum("ij,ij->i", points, points)[:, None]
        - 2.0 * points @ centroids.T
        + np.einsum("ij,ij->i", centroids, centroids)[None, :]
    )
    labels = np.argmin(sq, axis=1)
    diff = points - centroids[labels]
    sse = float(np.einsum("ij,ij->", diff, diff))
    return labels, sse
