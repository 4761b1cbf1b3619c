# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the pykernels functions.

Hash outputs are bit-identical to the pure versions; logits may differ
from numpy only in floating summation order.
"""

from libc.stdint cimport int64_t, uint64_t

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef uint64_t FNV_BASIS = 14695981039346656037UL
cdef uint64_t FNV_PRIME = 1099511628211UL


cdef inline uint64_t _fnv1a64(const unsigned char* data, Py_ssize_t n) noexcept nogil:
    cdef uint64_t h = FNV_BASIS
    cdef Py_ssize_t i
    for i in range(n):
        h = (h ^ data[i]) * FNV_PRIME
    return h


def fnv1a64(bytes data) -> int:
    """FNV-1a 64-bit hash of a byte string (unsigned)."""
    return _fnv1a64(<const unsigned char*> data, len(data))


def ngram_hash_counts(tokens, int64_t dim):
    """Hash unigrams and adjacent bigrams (joined with '_') into [0, dim).

    Returns (indices, counts): sorted unique int64 hash buckets and the
    float64 occurrence count per bucket.
    """
    cdef Py_ssize_t t = len(tokens)
    if t == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)

    cdef cnp.ndarray[cnp.int64_t, ndim=1] raw = np.empty(2 * t - 1, dtype=np.int64)
    cdef int64_t[:] rawv = raw
    cdef list encoded = [tok.encode("utf-8") for tok in tokens]
    cdef bytes b
    cdef Py_ssize_t i
    for i in range(t):
        b = encoded[i]
        rawv[i] = <int64_t> (_fnv1a64(<const unsigned char*> b, len(b)) % <uint64_t> dim)
    for i in range(t - 1):
        b = encoded[i] + b"_" + encoded[i + 1]
        rawv[t + i] = <int64_t> (_fnv1a64(<const unsigned char*> b, len(b)) % <uint64_t> dim)

    raw.sort()
    # run-length encode the sorted buckets
    cdef Py_ssize_t m = raw.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.empty(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] val = np.empty(m, dtype=np.float64)
    cdef int64_t[:] idxv = idx
    cdef double[:] valv = val
    cdef Py_ssize_t out = 0
    idxv[0] = rawv[0]
    valv[0] = 1.0
    for i in range(1, m):
        if rawv[i] == idxv[out]:
            valv[out] += 1.0
        else:
            out += 1
            idxv[out] = rawv[i]
            valv[out] = 1.0
    return idx[: out + 1], val[: out + 1]


def batch_logits(
    int64_t[:] indptr,
    int64_t[:] indices,
    double[:] values,
    double[:, :] weights,
    double[:] bias,
):
    """Dense logits for a CSR batch of sparse feature rows."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t num_classes = weights.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty(
        (n, num_classes), dtype=np.float64
    )
    cdef double[:, :] outv = out
    cdef Py_ssize_t r, c, k
    cdef double acc
    with nogil:
        for r in range(n):
            for c in range(num_classes):
                acc = bias[c]
                for k in range(indptr[r], indptr[r + 1]):
                    acc += values[k] * weights[c, indices[k]]
                outv[r, c] = acc
    return out
