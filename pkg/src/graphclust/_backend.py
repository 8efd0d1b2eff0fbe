"""Select the compiled kernels, or the numpy fallback when unavailable.

Set ``GRAPHCLUST_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from graphclust import _fallback

if os.environ.get("GRAPHCLUST_PURE_PYTHON") == "1":
    kernels = _fallback
else:
    try:
        from graphclust import _kernels as kernels
    except ImportError:  # extension not built
        kernels = _fallback

BACKEND = "cython" if kernels is not _fallback else "python"

__all__ = ["kernels", "BACKEND", "_fallback"]
