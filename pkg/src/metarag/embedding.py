"""Embedding contract, vector math, and the deterministic hash embedder.

Vectors are numpy float32 arrays. Everything stored in an index is
L2-normalized, so inner product equals cosine similarity.
"""

from __future__ import annotations

import numpy as np

from metarag import _kernels
from metarag.exceptions import DimensionMismatch, EmptyText, ZeroVector


def normalize(v: np.ndarray) -> np.ndarray:
    """Return ``v / ||v||``, raising :class:`ZeroVector` on zero norm."""
    norm = float(np.linalg.norm(np.asarray(v, dtype=np.float64)))
    if norm == 0.0:
        raise ZeroVector()
    return (np.asarray(v, dtype=np.float64) / norm).astype(np.float32)


def inner_product(a: np.ndarray, b: np.ndarray) -> float:
    """Sum of elementwise products; cosine similarity for unit vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(a.shape[-1], b.shape[-1])
    return float(np.dot(a.astype(np.float64), b.astype(np.float64)))


def embed_batch(texts: list[str], embedder) -> list[np.ndarray]:
    """Embed ``texts`` in order, one unit vector per text.

    Raises :class:`EmptyText` with the offending position before any
    provider call is made.
    """
    for i, text in enumerate(texts):
        if not text:
            raise EmptyText(i)
    return embedder.embed(texts)


class HashEmbedder:
    """Deterministic feature-hash embedder used for offline runs.

    Lowercased whitespace tokens are hashed with 64-bit FNV-1a into
    ``dim`` buckets; the bucket histogram is L2-normalized. Token order
    never matters, and texts sharing no token embed orthogonally.
    """

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        out = []
        for i, text in enumerate(texts):
            tokens = text.lower().split()
            if not tokens:
                raise EmptyText(i)
            counts = _kernels.fnv1a_bucket_counts(tokens, self.dim)
            out.append(normalize(counts))
        return out


class RemoteEmbedder:
    """Adapter for an HTTP embedding endpoint.

    Wire contract: POST ``{"model": ..., "texts": [...]}``, response
    ``{"vectors": [[...], ...]}``. Vectors are re-normalized locally.
    """

    def __init__(self, endpoint: str, model: str, dim: int,
                 api_key: str = "", transport=None):
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.api_key = api_key
        self._transport = transport or _requests_transport

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        for i, text in enumerate(texts):
            if not text:
                raise EmptyText(i)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        status, body = self._transport(
            self.endpoint, {"model": self.model, "texts": texts}, headers)
        if status != 200:
            from metarag.exceptions import ProviderError
            raise ProviderError(status, body)
        import json
        vectors = json.loads(body)["vectors"]
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape[0] != self.dim:
                raise DimensionMismatch(arr.shape[0], self.dim)
            out.append(normalize(arr))
        return out


def _requests_transport(url, payload, headers, timeout=60):
    import requests

    resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    return resp.status_code, resp.text
