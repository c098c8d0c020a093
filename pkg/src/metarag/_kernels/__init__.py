"""Retrieval kernels with a compiled fast path.

The Cython extension is preferred when it was built; otherwise the
numpy fallback is used. ``METARAG_PURE_PYTHON=1`` forces the fallback,
which is how the backend-equivalence tests and the kernel benchmark
exercise both paths.
"""

import os

if os.environ.get("METARAG_PURE_PYTHON"):
    from metarag._kernels import _fallback as _impl
    BACKEND = "python"
else:
    try:
        from metarag._kernels import _native as _impl
        BACKEND = "native"
    except ImportError:
        from metarag._kernels import _fallback as _impl
        BACKEND = "python"

topk_inner_product = _impl.topk_inner_product
fnv1a_bucket_counts = _impl.fnv1a_bucket_counts

__all__ = ["BACKEND", "topk_inner_product", "fnv1a_bucket_counts"]
