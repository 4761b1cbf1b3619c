"""Classifier backends: the in-process linear model or a remote service.

Both kinds satisfy the same contract: `classify` returns the argmax
label (smallest index wins ties) and a probability vector summing to 1.
Remote failures surface as BackendUnavailableError; the pipeline owns
the fallback policy.
"""

import threading
from dataclasses import dataclass, field
from typing import Union
from urllib.parse import urlparse

import httpx
import numpy as np

from .errors import BackendUnavailableError, ValidationError
from .features import featurize
from .linear import LinearModel, predict_scores
from .protocol import CLASSIFY_PATH, LabelSpace, classify_request, validate_response
from .types import Post


@dataclass(frozen=True)
class NativeBackend:
    model: LinearModel
    label_space: LabelSpace

    def __post_init__(self):
        if self.model.num_classes != self.label_space.num_classes:
            raise ValidationError(
                f"model has {self.model.num_classes} classes, "
                f"{self.label_space.value} needs {self.label_space.num_classes}"
            )


@dataclass
class RemoteBackend:
    endpoint: str
    label_space: LabelSpace
    timeout_ms: int = 2000
    max_inflight: int = 8
    _semaphore: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self):
        parsed = urlparse(self.endpoint)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValidationError(f"invalid backend endpoint: {self.endpoint!r}")
        if self.timeout_ms <= 0:
            raise ValidationError("timeout must be positive")
        if self.max_inflight <= 0:
            raise ValidationError("max_inflight must be positive")
        self._semaphore = threading.Semaphore(self.max_inflight)

    @property
    def classify_url(self) -> str:
        return self.endpoint.rstrip("/") + CLASSIFY_PATH


ClassifierBackend = Union[NativeBackend, RemoteBackend]


def classify(backend: ClassifierBackend, post: Post) -> tuple[int, np.ndarray]:
    """Run one post through a backend; returns (label, score vector)."""
    if isinstance(backend, NativeBackend):
        scores = predict_scores(backend.model, featurize(post.tokens))
        return int(np.argmax(scores)), scores
    return _classify_remote(backend, post.text)


def _classify_remote(backend: RemoteBackend, text: str) -> tuple[int, np.ndarray]:
    timeout = backend.timeout_ms / 1000.0
    with backend._semaphore:
        try:
            response = httpx.post(
                backend.classify_url,
                json=classify_request(text, backend.label_space),
                timeout=timeout,
            )
        except httpx.HTTPError as exc:
            raise BackendUnavailableError(backend.endpoint, str(exc)) from exc
    if response.status_code != 200:
        raise BackendUnavailableError(
            backend.endpoint, f"HTTP {response.status_code}"
        )
    try:
        payload = response.json()
    except ValueError:
        raise BackendUnavailableError(backend.endpoint, "response is not JSON")
    try:
        label, scores = validate_response(payload, backend.label_space)
    except ValueError as exc:
        raise BackendUnavailableError(backend.endpoint, str(exc)) from None
    return label, np.asarray(scores, dtype=np.float64)


def probe_health(backend: ClassifierBackend) -> bool:
    """Best-effort reachability check; native backends are always up."""
    if isinstance(backend, NativeBackend):
        return True
    url = backend.endpoint.rstrip("/") + "/v1/health"
    try:
        return httpx.get(url, timeout=backend.timeout_ms / 1000.0).status_code == 200
    except httpx.HTTPError:
        return False
