"""Hot numeric kernels.

Each kernel exists twice: a numba ``@njit`` build and a pure-numpy fallback.
The numba build is used when numba imports cleanly, unless the environment
variable ``STYLESPACE_NUMBA`` is set to ``0``/``false``/``off``.
Both builds are deterministic, but they are not guaranteed to agree to the
last bit, so reproducibility claims hold per backend.
"""

import os

import numpy as np

from . import _numpy

_DISABLED = {"0", "false", "off", "no"}

try:
    from . import _numba
except ImportError:  # pragma: no cover - numba missing
    _numba = None

USE_NUMBA = _numba is not None and os.environ.get("STYLESPACE_NUMBA", "1").strip().lower() not in _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"
_impl = _numba if USE_NUMBA else _numpy


def nearest_rows(points, centroids):
    return _impl.nearest_rows(np.ascontiguousarray(points, dtype=np.float64),
                              np.ascontiguousarray(centroids, dtype=np.float64))


def cluster_sums(points, assign, k):
    return _impl.cluster_sums(np.ascontiguousarray(points, dtype=np.float64),
                              np.ascontiguousarray(assign, dtype=np.int64), int(k))


def contrastive_batch(sa, sb, positive, margin):
    return _impl.contrastive_batch(np.ascontiguousarray(sa, dtype=np.float64),
                                   np.ascontiguousarray(sb, dtype=np.float64),
                                   np.ascontiguousarray(positive, dtype=np.bool_),
                                   float(margin))


__all__ = ["BACKEND", "USE_NUMBA", "nearest_rows", "cluster_sums", "contrastive_batch"]
