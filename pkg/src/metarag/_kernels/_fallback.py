"""Pure-Python/numpy implementations of the retrieval kernels.

Semantics must match ``_native`` exactly: scores are float32 inner
products accumulated in float64, ties broken by ascending row index.
"""

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def topk_inner_product(matrix, query, mask, k):
    """Top-k rows of ``matrix`` by inner product with ``query``.

    Rows where ``mask`` is 0 are skipped (``mask=None`` scans all rows).
    Returns ``(indices, scores)`` sorted by score descending, ties by
    ascending row index; fewer than ``k`` entries when eligible rows
    are scarce.
    """
    n = matrix.shape[0]
    if mask is not None:
        rows = np.nonzero(mask)[0].astype(np.int64)
    else:
        rows = np.arange(n, dtype=np.int64)
    if rows.size == 0 or k <= 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    scores = matrix[rows].astype(np.float64) @ query.astype(np.float64)
    order = np.lexsort((rows, -scores))[: min(k, rows.size)]
    return rows[order], scores[order]


def fnv1a_bucket_counts(tokens, dim):
    """Histogram of 64-bit FNV-1a token hashes over ``dim`` buckets."""
    out = np.zeros(dim, dtype=np.float64)
    for tok in tokens:
        h = _FNV_OFFSET
        for b in tok.encode("utf-8"):
            h = ((h ^ b) * _FNV_PRIME) & _MASK64
        out[h % dim] += 1.0
    return out
