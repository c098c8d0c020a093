# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled retrieval kernels: filtered top-k scan and FNV-1a hashing.

Single fused pass over the vector matrix: the metadata mask, the dot
product, and the bounded insertion into the running top-k all happen
per row without numpy temporaries.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.float32_t f32
ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64
ctypedef cnp.uint8_t u8
ctypedef cnp.uint64_t u64


def topk_inner_product(f32[:, ::1] matrix, f32[::1] query, mask, Py_ssize_t k):
    """Top-k rows by inner product; ties broken by ascending row index."""
    cdef Py_ssize_t n = matrix.shape[0]
    cdef Py_ssize_t d = matrix.shape[1]
    cdef u8[::1] mview
    cdef bint has_mask = mask is not None
    if has_mask:
        mview = mask
    if k > n:
        k = n
    if k <= 0 or n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)

    top_idx = np.empty(k, dtype=np.int64)
    top_sc = np.empty(k, dtype=np.float64)
    cdef i64[::1] ti = top_idx
    cdef f64[::1] ts = top_sc
    cdef Py_ssize_t m = 0, i, j, p, q
    cdef f64 s

    for i in range(n):
        if has_mask and mview[i] == 0:
            continue
        s = 0.0
        for j in range(d):
            s += <f64> matrix[i, j] * <f64> query[j]
        if m < k:
            p = m
            while p > 0 and ts[p - 1] < s:
                p -= 1
            for q in range(m, p, -1):
                ts[q] = ts[q - 1]
                ti[q] = ti[q - 1]
            ts[p] = s
            ti[p] = i
            m += 1
        elif s > ts[m - 1]:
            p = m - 1
            while p > 0 and ts[p - 1] < s:
                p -= 1
            for q in range(m - 1, p, -1):
                ts[q] = ts[q - 1]
                ti[q] = ti[q - 1]
            ts[p] = s
            ti[p] = i

    return top_idx[:m].copy(), top_sc[:m].copy()


def fnv1a_bucket_counts(tokens, Py_ssize_t dim):
    """Histogram of 64-bit FNV-1a token hashes over ``dim`` buckets."""
    out = np.zeros(dim, dtype=np.float64)
    cdef f64[::1] o = out
    cdef u64 h
    cdef u64 prime = 0x100000001B3UL
    cdef u64 offset = 0xCBF29CE484222325UL
    cdef bytes bt
    cdef const unsigned char* data
    cdef Py_ssize_t i, blen
    for tok in tokens:
        bt = tok.encode("utf-8")
        data = bt
        blen = len(bt)
        h = offset
        for i in range(blen):
            h = (h ^ <u64> data[i]) * prime
        o[h % <u64> dim] += 1.0
    return out
