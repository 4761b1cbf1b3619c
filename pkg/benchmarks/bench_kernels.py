"""Benchmark the compiled kernels against the pure-Python fallback.

Measures the two hot paths: hashed n-gram featurization (per post) and
CSR batch logits (per classification).  Run from the repo root:

    python benchmarks/bench_kernels.py [--posts 20000]
"""

import argparse
import random
import string
import time

import numpy as np

from estatewatch.features import FEATURE_DIM
from estatewatch.kernels import pykernels

try:
    from estatewatch.kernels import _ckernels
except ImportError:
    _ckernels = None


def make_token_lists(n, seed=1234):
    rnd = random.Random(seed)
    vocab = [
        "".join(rnd.choices(string.ascii_lowercase, k=rnd.randrange(3, 11)))
        for _ in range(2000)
    ]
    return [rnd.choices(vocab, k=rnd.randrange(4, 18)) for _ in range(n)]


def bench_featurize(impl, token_lists):
    start = time.perf_counter()
    nnz = 0
    for tokens in token_lists:
        idx, _ = impl.ngram_hash_counts(tokens, FEATURE_DIM)
        nnz += len(idx)
    elapsed = time.perf_counter() - start
    return elapsed, nnz


def bench_logits(impl, token_lists, num_classes=4, repeats=3):
    rng = np.random.default_rng(7)
    weights = rng.normal(size=(num_classes, FEATURE_DIM))
    bias = rng.normal(size=num_classes)
    rows = [pykernels.ngram_hash_counts(t, FEATURE_DIM) for t in token_lists]
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    for i, (idx, _) in enumerate(rows):
        indptr[i + 1] = indptr[i] + len(idx)
    indices = np.concatenate([idx for idx, _ in rows])
    values = np.concatenate([val for _, val in rows])
    start = time.perf_counter()
    for _ in range(repeats):
        impl.batch_logits(indptr, indices, values, weights, bias)
    return (time.perf_counter() - start) / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--posts", type=int, default=20_000)
    args = parser.parse_args()

    token_lists = make_token_lists(args.posts)
    backends = [("pure-python", pykernels)]
    if _ckernels is not None:
        backends.append(("compiled", _ckernels))
    else:
        print("compiled kernels not built; benchmarking the fallback only")

    print(f"\nfeaturize: {args.posts} posts")
    base = None
    for name, impl in backends:
        elapsed, nnz = bench_featurize(impl, token_lists)
        rate = args.posts / elapsed
        speedup = "" if base is None else f"  ({base / elapsed:.1f}x)"
        base = base or elapsed
        print(f"  {name:<12} {elapsed:8.3f} s   {rate:10.0f} posts/s{speedup}")

    print(f"\nbatch logits: {args.posts} rows x 4 classes")
    base = None
    for name, impl in backends:
        elapsed = bench_logits(impl, token_lists)
        rate = args.posts / elapsed
        speedup = "" if base is None else f"  ({base / elapsed:.1f}x)"
        base = base or elapsed
        print(f"  {name:<12} {elapsed:8.3f} s   {rate:10.0f} rows/s{speedup}")


if __name__ == "__main__":
    main()
