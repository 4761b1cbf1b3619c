"""Hashed n-gram features for the linear classifier.

Unigrams and adjacent bigrams (joined with "_") are hashed with FNV-1a
64-bit into a fixed 2^18 space; counts are L2-normalized.  The hash is
unsalted, so feature vectors are byte-stable across runs and platforms.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels

FEATURE_DIM = 1 << 18


@dataclass(frozen=True)
class FeatureVector:
    """Sparse L2-normalized vector: sorted indices with their weights."""

    indices: np.ndarray  # int64, sorted, unique, in [0, FEATURE_DIM)
    values: np.ndarray  # float64, no explicit zeros

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.indices.tolist(), self.values.tolist()))

    def __len__(self) -> int:
        return len(self.indices)


def featurize(tokens: Sequence[str], dim: int = FEATURE_DIM) -> FeatureVector:
    """Hash token n-grams into a sparse L2-normalized count vector."""
    indices, counts = kernels.ngram_hash_counts(list(tokens), dim)
    norm = np.linalg.norm(counts)
    if norm > 0:
        counts = counts / norm
    return FeatureVector(indices, counts)


def to_csr(
    vectors: Sequence[FeatureVector],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pack feature vectors into CSR arrays (indptr, indices, values)."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, vec in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(vec)
    if vectors:
        indices = np.concatenate([v.indices for v in vectors])
        values = np.concatenate([v.values for v in vectors])
    else:
        indices = np.empty(0, dtype=np.int64)
        values = np.empty(0, dtype=np.float64)
    return indptr, indices.astype(np.int64), values.astype(np.float64)
