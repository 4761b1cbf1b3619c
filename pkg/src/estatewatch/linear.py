"""Trainable multinomial logistic regression over hashed n-gram features.

Mini-batch SGD on the L2-regularized cross-entropy.  The per-epoch
learning rate is lr / sqrt(epoch); shuffling uses a fixed seed so runs
are reproducible.
"""

import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateDataError, DivergenceError, SchemaError, ValidationError
from .features import FEATURE_DIM, FeatureVector, featurize, to_csr
from .protocol import LabelSpace
from .types import Corpus, EstateLabel

MODEL_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    l2: float = 1e-4
    learning_rate: float = 0.1
    epochs: int = 20
    batch_size: int = 32
    seed: int = 13
    dim: int = FEATURE_DIM


@dataclass(frozen=True)
class LinearModel:
    num_classes: int
    weights: np.ndarray  # (num_classes, dim) float64
    bias: np.ndarray  # (num_classes,) float64
    trained_on: str = ""

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValidationError("a linear model needs at least 2 classes")
        if self.weights.shape != (self.num_classes, self.dim) or self.bias.shape != (
            self.num_classes,
        ):
            raise ValidationError("weight/bias shapes do not match num_classes")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValidationError("model weights must be finite")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, num_classes: int, dim: int = FEATURE_DIM) -> "LinearModel":
        return cls(
            num_classes=num_classes,
            weights=np.zeros((num_classes, dim)),
            bias=np.zeros(num_classes),
        )


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stable under large logits."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    indptr: np.ndarray,
    indices: np.ndarray,
    values: np.ndarray,
    labels: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Regularized cross-entropy and its full analytic gradient.

    loss = mean_i(-log softmax(Wx_i + b)[y_i]) + l2/2 * ||W||^2
    (the bias is unpenalized).
    """
    n = len(labels)
    logits = kernels.batch_logits(indptr, indices, values, weights, bias)
    log_probs = _log_softmax(logits)
    data_loss = -log_probs[np.arange(n), labels].mean()
    loss = data_loss + 0.5 * l2 * float((weights**2).sum())

    delta = softmax(logits)
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grad_w = l2 * weights
    for r in range(n):
        lo, hi = indptr[r], indptr[r + 1]
        grad_w[:, indices[lo:hi]] += np.outer(delta[r], values[lo:hi])
    grad_b = delta.sum(axis=0)
    return float(loss), grad_w, grad_b


def dataset_loss(
    weights: np.ndarray,
    bias: np.ndarray,
    indptr: np.ndarray,
    indices: np.ndarray,
    values: np.ndarray,
    labels: np.ndarray,
    l2: float,
) -> float:
    """Regularized cross-entropy over a full dataset (no gradient)."""
    logits = kernels.batch_logits(indptr, indices, values, weights, bias)
    log_probs = _log_softmax(logits)
    data_loss = -log_probs[np.arange(len(labels)), labels].mean()
    return float(data_loss + 0.5 * l2 * (weights**2).sum())


def _training_pairs(
    corpus: Corpus, target: LabelSpace
) -> list[tuple[int, int]]:
    """(post index, class) pairs with gold labels for the requested stage."""
    pairs: list[tuple[int, int]] = []
    if target is LabelSpace.ESTATE:
        if not corpus.gold_estate:
            raise ValidationError("corpus carries no gold estate labels")
        for i, post in enumerate(corpus.posts):
            label = corpus.gold_estate.get(post.post_id)
            if label is not None:
                pairs.append((i, label.value))
    else:
        if not corpus.gold_topic:
            raise ValidationError("corpus carries no gold topic labels")
        for i, post in enumerate(corpus.posts):
            label = corpus.gold_topic.get(post.post_id)
            if label is None:
                continue
            # hierarchical setting: topic training sees estate posts only
            if corpus.gold_estate is not None:
                estate = corpus.gold_estate.get(post.post_id)
                if estate is not EstateLabel.ESTATE:
                    continue
            pairs.append((i, label.value))
    return pairs


def _fingerprint(pairs: Sequence[tuple[str, int]]) -> str:
    payload = json.dumps(sorted(pairs), separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def train_linear(
    corpus: Corpus,
    target: LabelSpace,
    config: Optional[TrainConfig] = None,
    epoch_losses: Optional[list[float]] = None,
) -> LinearModel:
    """Fit the stage classifier on the corpus's gold labels.

    Raises DegenerateDataError when fewer than two classes are present
    and DivergenceError if the loss ever turns non-finite.  When given,
    `epoch_losses` is filled with the full-dataset loss after each epoch.
    """
    cfg = config or TrainConfig()
    pairs = _training_pairs(corpus, target)
    if len({label for _, label in pairs}) < 2:
        raise DegenerateDataError(
            f"{target.value} training needs at least 2 classes, "
            f"got {sorted({label for _, label in pairs})}"
        )
    num_classes = target.num_classes

    vectors = [featurize(corpus.posts[i].tokens, cfg.dim) for i, _ in pairs]
    labels = np.array([label for _, label in pairs], dtype=np.int64)
    full_csr = to_csr(vectors)

    weights = np.zeros((num_classes, cfg.dim))
    bias = np.zeros(num_classes)
    rng = np.random.default_rng(cfg.seed)
    n = len(pairs)

    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.learning_rate / np.sqrt(epoch)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            indptr, indices, values = to_csr([vectors[i] for i in batch])
            logits = kernels.batch_logits(indptr, indices, values, weights, bias)
            delta = softmax(logits)
            delta[np.arange(len(batch)), labels[batch]] -= 1.0
            delta /= len(batch)
            # W <- (1 - lr*l2) W - lr * data-gradient; only active columns move
            weights *= 1.0 - lr * cfg.l2
            for r in range(len(batch)):
                lo, hi = indptr[r], indptr[r + 1]
                weights[:, indices[lo:hi]] -= lr * np.outer(delta[r], values[lo:hi])
            bias -= lr * delta.sum(axis=0)
        loss = dataset_loss(weights, bias, *full_csr, labels, cfg.l2)
        if not np.isfinite(loss):
            raise DivergenceError(epoch)
        if epoch_losses is not None:
            epoch_losses.append(loss)

    fingerprint = _fingerprint(
        [(corpus.posts[i].post_id, label) for i, label in pairs]
    )
    return LinearModel(
        num_classes=num_classes, weights=weights, bias=bias, trained_on=fingerprint
    )


def predict_scores(model: LinearModel, vector: FeatureVector) -> np.ndarray:
    """Softmax class probabilities for one feature vector."""
    indptr = np.array([0, len(vector)], dtype=np.int64)
    logits = kernels.batch_logits(
        indptr, vector.indices, vector.values, model.weights, model.bias
    )
    return softmax(logits)[0]


# --- model files ----------------------------------------------------------
#
# A model file is a numpy .npz archive: arrays `weights` and `bias` plus a
# JSON `meta` string embedding the format version, dimension and class
# count.  The loader rejects any mismatch between meta and array shapes.


def save_model(model: LinearModel, path) -> None:
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "num_classes": model.num_classes,
        "dim": model.dim,
        "trained_on": model.trained_on,
    }
    with open(path, "wb") as fh:
        np.savez_compressed(
            fh, weights=model.weights, bias=model.bias, meta=json.dumps(meta)
        )


def load_model(path) -> LinearModel:
    try:
        archive = np.load(path, allow_pickle=False)
    except FileNotFoundError:
        raise
    except (OSError, ValueError) as exc:
        raise SchemaError(f"unreadable model file {path}: {exc}") from None
    try:
        meta = json.loads(str(archive["meta"]))
        weights = archive["weights"]
        bias = archive["bias"]
    except KeyError as exc:
        raise SchemaError(f"model file {path} missing entry {exc}") from None
    if meta.get("format_version") != MODEL_FORMAT_VERSION:
        raise SchemaError(
            f"unsupported model format version {meta.get('format_version')}"
        )
    expected = (meta["num_classes"], meta["dim"])
    if weights.shape != expected:
        raise SchemaError(
            f"model dimension mismatch: weights {weights.shape}, meta {expected}"
        )
    return LinearModel(
        num_classes=int(meta["num_classes"]),
        weights=weights.astype(np.float64),
        bias=bias.astype(np.float64),
        trained_on=meta.get("trained_on", ""),
    )
