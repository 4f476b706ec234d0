"""Kernel backend selection.

Two implementations of the two hot kernels: a compiled fused-loop extension
(``_fast``) and a pure-numpy fallback that leans on BLAS.  On hardware with a
tuned BLAS the numpy path wins at every size measured by
``benchmarks/bench_kernels.py``, so it is the default; set
``RAHP_KERNEL_BACKEND=cython`` to force the compiled kernels (useful where
BLAS is slow or absent).  Both backends produce identical cluster assignments
and cosine values to within the last bit of rounding, and each is
individually deterministic: the same call sequence yields the same bytes
regardless of worker thread count.
"""

import importlib
import os

import numpy as np

from . import _numpy as _np_backend

_fast = None
if os.environ.get("RAHP_KERNEL_BACKEND", "").lower() not in ("numpy", "python"):
    try:
        _fast = importlib.import_module("._fast", __name__)
    except ImportError:
        _fast = None

_FORCE_FAST = (
    os.environ.get("RAHP_KERNEL_BACKEND", "").lower() == "cython"
    and _fast is not None
)

BACKEND = _fast.NAME if _FORCE_FAST else _np_backend.NAME

# Compiled-loop size guard when the compiled backend is forced: very large
# products still go to BLAS, which dominates past this many multiply-adds.
_FUSED_LIMIT = 4_000_000


def _as_c64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def cosine_matrix(a, b):
    """Pairwise cosine similarities between rows of ``a`` and rows of ``b``."""
    a = _as_c64(a)
    b = _as_c64(b)
    if _FORCE_FAST and a.shape[0] * b.shape[0] * a.shape[1] <= _FUSED_LIMIT:
        return np.asarray(_fast.cosine_matrix(a, b))
    return _np_backend.cosine_matrix(a, b)


def assign_clusters(points, centroids):
    """Nearest-centroid labels plus total SSE; ties go to the lowest index."""
    points = _as_c64(points)
    centroids = _as_c64(centroids)
    if _FORCE_FAST:
        labels, sse = _fast.assign_clusters(points, centroids)
        return np.asarray(labels), float(sse)
    return _np_backend.assign_clusters(points, centroids)
