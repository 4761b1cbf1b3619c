"""Pure-Python / numpy implementations of the hot kernels.

These are the reference semantics; `_ckernels.pyx` is a drop-in compiled
twin.  Hash results are exact integers and must match the compiled
version bit-for-bit; float results may differ only by summation order.
"""

from collections import Counter
from typing import Sequence

import numpy as np

FNV_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash of a byte string (unsigned)."""
    h = FNV_BASIS
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def ngram_hash_counts(
    tokens: Sequence[str], dim: int
) -> tuple[np.ndarray, np.ndarray]:
    """Hash unigrams and adjacent bigrams (joined with '_') into [0, dim).

    Returns (indices, counts): sorted unique int64 hash buckets and the
    float64 occurrence count per bucket.
    """
    if not tokens:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    grams = list(tokens)
    grams.extend(
        tokens[i] + "_" + tokens[i + 1] for i in range(len(tokens) - 1)
    )
    counts = Counter(fnv1a64(g.encode("utf-8")) % dim for g in grams)
    indices = np.fromiter(sorted(counts), dtype=np.int64, count=len(counts))
    values = np.fromiter(
        (counts[i] for i in indices), dtype=np.float64, count=len(counts)
    )
    return indices, values


def batch_logits(
    indptr: np.ndarray,
    indices: np.ndarray,
    values: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
) -> np.ndarray:
    """Dense logits for a CSR batch of sparse feature rows.

    `weights` has shape (num_classes, dim); row r of the output is
    weights[:, cols_r] @ vals_r + bias.
    """
    n = len(indptr) - 1
    out = np.empty((n, weights.shape[0]), dtype=np.float64)
    for r in range(n):
        lo, hi = indptr[r], indptr[r + 1]
        out[r] = weights[:, indices[lo:hi]] @ values[lo:hi] + bias
    return out
