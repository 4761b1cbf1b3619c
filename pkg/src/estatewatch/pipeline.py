"""Hierarchical routing: estate gate, then topic, then geolocation, then
the event store.

A post only reaches the topic classifier when the gate says estate, and
only reaches geolocation when it has a topic to report.  Remote backend
outages follow the configured fallback policy: park the post for retry
(delayed beats dropped) or classify with a local linear model and flag
the event.
"""

import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .backends import ClassifierBackend, NativeBackend, classify
from .errors import BackendUnavailableError, ValidationError
from .geolocation import Gazetteer, coarsen_to_neighbourhood, geolocate
from .linear import LinearModel
from .protocol import LabelSpace
from .types import (
    ClassifiedEvent,
    Corpus,
    EstateLabel,
    Granularity,
    Post,
    ResolvedLocation,
    TopicLabel,
    topic_from_name,
)
from .persistence import EventStore


class GeolocationMode(Enum):
    OFF = "off"
    POI = "poi"
    NEIGHBOURHOOD = "neighbourhood"


# --- topic consolidation ---------------------------------------------------

MAJOR_CATEGORIES = ("Infrastructure", "Parking", "Noise")


@dataclass(frozen=True)
class ConsolidationMap:
    """Folds a source report taxonomy onto the four deployed topics.

    The three major categories always map to themselves; every source
    category not listed resolves to the default target, so the mapping
    is total.
    """

    mapping: dict[str, TopicLabel] = field(default_factory=dict)
    default_target: TopicLabel = TopicLabel.OTHERS

    def __post_init__(self):
        merged = dict(self.mapping)
        for name in MAJOR_CATEGORIES:
            expected = topic_from_name(name)
            if merged.setdefault(name, expected) is not expected:
                raise ValidationError(f"{name} must map to itself")
        object.__setattr__(self, "mapping", merged)


DEFAULT_CONSOLIDATION = ConsolidationMap()


def consolidate(
    category: str, cmap: ConsolidationMap = DEFAULT_CONSOLIDATION
) -> TopicLabel:
    """Map a source category name to its deployed topic (total function)."""
    return cmap.mapping.get(category, cmap.default_target)


# --- configuration ---------------------------------------------------------


@dataclass(frozen=True)
class QueueFallback:
    """Park posts while a remote backend is down; retry later."""


@dataclass(frozen=True)
class NativeFallback:
    """Fall back to local linear models; events are flagged."""

    estate_model: Optional[LinearModel] = None
    topic_model: Optional[LinearModel] = None

    def model_for(self, space: LabelSpace) -> Optional[LinearModel]:
        return self.estate_model if space is LabelSpace.ESTATE else self.topic_model


RemoteFallback = Union[QueueFallback, NativeFallback]


@dataclass(frozen=True)
class PipelineConfig:
    estate_backend: ClassifierBackend
    topic_backend: ClassifierBackend
    store_path: str
    geolocation_mode: GeolocationMode = GeolocationMode.OFF
    remote_fallback: RemoteFallback = QueueFallback()
    gazetteer: Optional[Gazetteer] = None
    retry_capacity: int = 10_000
    retry_base_delay_s: float = 1.0

    def __post_init__(self):
        if self.estate_backend.label_space is not LabelSpace.ESTATE:
            raise ValidationError("estate backend must use the estate label space")
        if self.topic_backend.label_space is not LabelSpace.TOPIC:
            raise ValidationError("topic backend must use the topic label space")
        if self.geolocation_mode is not GeolocationMode.OFF and self.gazetteer is None:
            raise ValidationError(
                f"geolocation mode {self.geolocation_mode.value} needs a gazetteer"
            )
        if isinstance(self.remote_fallback, NativeFallback):
            for space in (LabelSpace.ESTATE, LabelSpace.TOPIC):
                model = self.remote_fallback.model_for(space)
                if model is not None and model.num_classes != space.num_classes:
                    raise ValidationError(
                        f"fallback model for {space.value} has wrong class count"
                    )


# --- retry queue -----------------------------------------------------------


@dataclass
class ParkedPost:
    post: Post
    attempts: int
    eligible_at: float


class RetryQueue:
    """Bounded FIFO of posts awaiting a backend, with exponential backoff.

    When full, the oldest entry is dropped and counted; callers can
    surface `dropped` in health output.
    """

    def __init__(self, capacity: int, base_delay_s: float, max_delay_s: float = 300.0):
        self._entries: deque[ParkedPost] = deque()
        self._capacity = capacity
        self._base = base_delay_s
        self._max = max_delay_s
        self._lock = threading.Lock()
        self.dropped = 0

    def __len__(self) -> int:
        return len(self._entries)

    def park(self, post: Post, attempts: int = 0, now: Optional[float] = None) -> None:
        now = time.monotonic() if now is None else now
        delay = min(self._base * (2.0**attempts), self._max)
        with self._lock:
            if len(self._entries) >= self._capacity:
                self._entries.popleft()
                self.dropped += 1
            self._entries.append(
                ParkedPost(post=post, attempts=attempts + 1, eligible_at=now + delay)
            )

    def take_eligible(self, now: Optional[float] = None) -> list[ParkedPost]:
        now = time.monotonic() if now is None else now
        with self._lock:
            keep: deque[ParkedPost] = deque()
            taken: list[ParkedPost] = []
            for entry in self._entries:
                (taken if entry.eligible_at <= now else keep).append(entry)
            self._entries = keep
            return taken


# --- the pipeline ----------------------------------------------------------


class Pipeline:
    """Owns the store appender and the retry queue for one deployment."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.store = EventStore.open(config.store_path)
        self.retry_queue = RetryQueue(
            capacity=config.retry_capacity, base_delay_s=config.retry_base_delay_s
        )

    def close(self) -> None:
        self.store.close()

    def __enter__(self) -> "Pipeline":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _stage(self, backend: ClassifierBackend, post: Post):
        """Classify one stage, applying the native fallback if configured.

        Returns ((label, scores), used_fallback); raises
        BackendUnavailableError when parking is the policy.
        """
        try:
            return classify(backend, post), False
        except BackendUnavailableError:
            fallback = self.config.remote_fallback
            if isinstance(fallback, NativeFallback):
                model = fallback.model_for(backend.label_space)
                if model is not None:
                    native = NativeBackend(model=model, label_space=backend.label_space)
                    return classify(native, post), True
            raise

    def _locate(self, post: Post) -> Optional[ResolvedLocation]:
        mode = self.config.geolocation_mode
        if mode is GeolocationMode.OFF:
            return None
        gaz = self.config.gazetteer
        if post.geotag is None:
            granularity = (
                Granularity.POI
                if mode is GeolocationMode.POI
                else Granularity.NEIGHBOURHOOD
            )
            return geolocate(post, gaz, granularity).resolved
        if mode is GeolocationMode.NEIGHBOURHOOD:
            # privacy coarsening applies to explicit geotags as well
            return coarsen_to_neighbourhood(post.geotag, gaz)
        return None  # POI mode keeps the explicit geotag

    def process_post(self, post: Post) -> Optional[ClassifiedEvent]:
        """Run the full routing for one post.

        Returns the persisted event, or None when the post was parked
        for retry.
        """
        return self._process(post)

    def _process(
        self, post: Post, prior_attempts: int = 0, now: Optional[float] = None
    ) -> Optional[ClassifiedEvent]:
        try:
            (estate_value, estate_scores), fell_back = self._stage(
                self.config.estate_backend, post
            )
            estate_label = EstateLabel(estate_value)
            topic_label = None
            topic_scores = None
            location = None
            if estate_label is EstateLabel.ESTATE:
                (topic_value, raw_scores), topic_fell_back = self._stage(
                    self.config.topic_backend, post
                )
                fell_back = fell_back or topic_fell_back
                topic_label = TopicLabel(topic_value)
                topic_scores = tuple(float(s) for s in raw_scores)
                location = self._locate(post)
        except BackendUnavailableError:
            self.retry_queue.park(post, attempts=prior_attempts, now=now)
            return None
        event = ClassifiedEvent(
            post=post,
            estate_label=estate_label,
            estate_score=float(estate_scores[1]),
            topic_label=topic_label,
            topic_scores=topic_scores,
            location=location,
            fallback=fell_back,
        )
        seq = self.store.append(event)
        return self.store.get(seq)

    def process_corpus(self, corpus: Corpus) -> list[ClassifiedEvent]:
        """Process posts in corpus order; parked posts emit no event yet."""
        events = []
        for post in corpus.posts:
            event = self.process_post(post)
            if event is not None:
                events.append(event)
        return events

    def retry_parked(self, now: Optional[float] = None) -> list[ClassifiedEvent]:
        """Re-run parked posts whose backoff has elapsed."""
        emitted = []
        for entry in self.retry_queue.take_eligible(now):
            event = self._process(entry.post, prior_attempts=entry.attempts, now=now)
            if event is not None:
                emitted.append(event)
        return emitted
