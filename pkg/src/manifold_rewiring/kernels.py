"""Backend selection for the walk-feature kernel.

The compiled extension is used when importable; set
``MANIFOLD_REWIRING_PURE=1`` to force the pure-Python fallback.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _walk_py

_compiled = None
if not os.environ.get("MANIFOLD_REWIRING_PURE"):
    try:
        from . import _walk_ext as _compiled
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def _impl(backend):
    if backend is None:
        backend = BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled walk kernel is not available")
        return _compiled
    if backend == "python":
        return _walk_py
    raise ValueError(f"unknown backend {backend!r}")


def walk_features_batch(indptr, indices, alive, pairs, h, threads=1, backend=None):
    """Raw walk counts for each local-index pair, shape ``(P, 2, 2h-1)``.

    Row 0 counts walks with the pair joined, row 1 with it cut; column ``j``
    is walk length ``j + 2``.
    """
    impl = _impl(backend)
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    if alive is None:
        alive = np.ones(len(indices), dtype=np.uint8)
    alive = np.ascontiguousarray(alive, dtype=np.uint8)
    pairs = np.ascontiguousarray(pairs, dtype=np.int64).reshape(-1, 2)
    if threads <= 1 or len(pairs) < 2 * threads or impl is _walk_py:
        return impl.walk_features_batch(indptr, indices, alive, pairs, h)
    chunks = np.array_split(pairs, threads)
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(
            lambda c: impl.walk_features_batch(indptr, indices, alive, c, h), chunks))
    return np.concatenate(parts)
