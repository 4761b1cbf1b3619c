"""Shared domain model: posts, labels, events, and their canonical JSON form.

Everything here is immutable after construction and safe to share across
concurrent pipeline stages.
"""

import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum, IntEnum
from typing import Iterable, Optional

from .errors import ValidationError
from .text import tokenize

SCORE_SUM_TOL = 1e-6


class EstateLabel(IntEnum):
    """Binary relevance: 1 means the post carries estate-related content."""

    NOT_ESTATE = 0
    ESTATE = 1


class TopicLabel(IntEnum):
    INFRASTRUCTURE = 0
    PARKING = 1
    NOISE = 2
    OTHERS = 3


# Serialized names, in label order.  The integer assignment is a fixed
# convention of this package; names are the canonical wire form.
TOPIC_NAMES = ("Infrastructure", "Parking", "Noise", "Others")
_TOPIC_BY_NAME = {name: TopicLabel(i) for i, name in enumerate(TOPIC_NAMES)}


def topic_name(label: TopicLabel) -> str:
    """Fixed display/wire name for a topic label."""
    return TOPIC_NAMES[label.value]


def topic_from_name(name: str) -> TopicLabel:
    try:
        return _TOPIC_BY_NAME[name]
    except KeyError:
        raise ValidationError(
            f"unknown topic name {name!r}; valid: {', '.join(TOPIC_NAMES)}"
        ) from None


class Granularity(Enum):
    POI = "POI"
    NEIGHBOURHOOD = "Neighbourhood"


def argmax_first(scores) -> int:
    """Index of the maximum score; ties break to the smallest index."""
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self):
        if not (-90.0 <= self.latitude <= 90.0):
            raise ValidationError(f"latitude out of range: {self.latitude}")
        if not (-180.0 <= self.longitude <= 180.0):
            raise ValidationError(f"longitude out of range: {self.longitude}")


@dataclass(frozen=True)
class Post:
    """One social media entry, already pseudonymized and tokenized."""

    post_id: str
    author_pseudonym: str
    text: str
    tokens: tuple[str, ...]
    created_at: datetime
    geotag: Optional[GeoPoint] = None

    def __post_init__(self):
        if not self.post_id:
            raise ValidationError("post_id must be non-empty")
        if self.created_at.utcoffset() != timedelta(0):
            raise ValidationError("created_at must be a UTC timestamp")
        if self.created_at.microsecond != 0:
            raise ValidationError("created_at must have seconds precision")

    @classmethod
    def build(
        cls,
        post_id: str,
        author_pseudonym: str,
        text: str,
        created_at: datetime,
        geotag: Optional[GeoPoint] = None,
    ) -> "Post":
        """Construct a Post with tokens derived from the text."""
        return cls(
            post_id=post_id,
            author_pseudonym=author_pseudonym,
            text=text,
            tokens=tuple(tokenize(text)),
            created_at=normalize_timestamp(created_at),
            geotag=geotag,
        )


@dataclass(frozen=True)
class Corpus:
    """Posts ordered by (created_at, post_id), plus optional gold labels."""

    posts: tuple[Post, ...]
    gold_estate: Optional[dict[str, EstateLabel]] = None
    gold_topic: Optional[dict[str, TopicLabel]] = None
    gold_location: Optional[dict[str, GeoPoint]] = None

    def __len__(self) -> int:
        return len(self.posts)

    @classmethod
    def build(
        cls,
        posts: Iterable[Post],
        gold_estate: Optional[dict[str, EstateLabel]] = None,
        gold_topic: Optional[dict[str, TopicLabel]] = None,
        gold_location: Optional[dict[str, GeoPoint]] = None,
    ) -> "Corpus":
        """Construct a Corpus with posts sorted into canonical order."""
        ordered = tuple(
            sorted(posts, key=lambda p: (p.created_at, p.post_id))
        )
        return cls(ordered, gold_estate, gold_topic, gold_location)


@dataclass(frozen=True)
class ResolvedLocation:
    granularity: Granularity
    neighbourhood_id: str
    latitude: float
    longitude: float
    confidence: float
    poi_id: Optional[str] = None

    def __post_init__(self):
        GeoPoint(self.latitude, self.longitude)  # range check
        if self.granularity is Granularity.POI and self.poi_id is None:
            raise ValidationError("POI granularity requires a poi_id")
        if self.granularity is Granularity.NEIGHBOURHOOD and self.poi_id is not None:
            raise ValidationError("neighbourhood granularity carries no poi_id")
        if not self.neighbourhood_id:
            raise ValidationError("neighbourhood_id must be non-empty")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence out of range: {self.confidence}")


@dataclass(frozen=True)
class ClassifiedEvent:
    """A post joined with its predictions; the unit of persistence."""

    post: Post
    estate_label: EstateLabel
    estate_score: float
    topic_label: Optional[TopicLabel] = None
    topic_scores: Optional[tuple[float, ...]] = None
    location: Optional[ResolvedLocation] = None
    pipeline_seq: int = 0
    fallback: bool = False

    def __post_init__(self):
        if not (0.0 <= self.estate_score <= 1.0):
            raise ValidationError(f"estate_score out of range: {self.estate_score}")
        if self.pipeline_seq < 0:
            raise ValidationError("pipeline_seq must be non-negative")
        has_topic = self.topic_label is not None
        if has_topic != (self.estate_label is EstateLabel.ESTATE):
            raise ValidationError(
                "topic_label present iff estate_label is 1 (hierarchical routing)"
            )
        if has_topic != (self.topic_scores is not None):
            raise ValidationError("topic_scores present iff topic_label present")
        if has_topic:
            scores = self.topic_scores
            if len(scores) != len(TOPIC_NAMES):
                raise ValidationError("topic_scores must have 4 entries")
            if not math.isclose(sum(scores), 1.0, abs_tol=SCORE_SUM_TOL):
                raise ValidationError("topic_scores must sum to 1")
            if self.topic_label.value != argmax_first(scores):
                raise ValidationError(
                    "topic_label must be the argmax of topic_scores"
                )
        if self.location is not None and self.post.geotag is not None:
            if self.location.granularity is not Granularity.NEIGHBOURHOOD:
                raise ValidationError(
                    "location may accompany a geotag only as a neighbourhood coarsening"
                )


@dataclass(frozen=True)
class Violation:
    """A broken invariant found by validate_corpus: data, not a failure."""

    post_id: str
    invariant: str


def validate_corpus(corpus: Corpus) -> list[Violation]:
    """Check every Corpus invariant; empty result means the corpus is sound."""
    violations: list[Violation] = []
    seen: set[str] = set()
    prev_key = None
    for post in corpus.posts:
        if post.post_id in seen:
            violations.append(Violation(post.post_id, "duplicate post_id"))
        seen.add(post.post_id)
        key = (post.created_at, post.post_id)
        if prev_key is not None and key < prev_key:
            violations.append(
                Violation(post.post_id, "posts out of (created_at, post_id) order")
            )
        prev_key = key
        if post.tokens != tuple(tokenize(post.text)):
            violations.append(
                Violation(post.post_id, "tokens are not tokenize(text)")
            )
    for name, gold in (
        ("gold_estate", corpus.gold_estate),
        ("gold_topic", corpus.gold_topic),
        ("gold_location", corpus.gold_location),
    ):
        if gold is None:
            continue
        for post_id in gold:
            if post_id not in seen:
                violations.append(
                    Violation(post_id, f"dangling {name} key: no such post")
                )
    return violations


# --- timestamps ---------------------------------------------------------


def normalize_timestamp(dt: datetime) -> datetime:
    """Convert to UTC and truncate to seconds precision."""
    if dt.tzinfo is None:
        raise ValidationError("timestamp must carry a timezone")
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def parse_timestamp(value: str) -> datetime:
    """Parse an RFC 3339 timestamp; naive values are rejected."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(f"bad timestamp {value!r}: {exc}") from None
    return normalize_timestamp(dt)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# --- canonical serialization --------------------------------------------
#
# One JSON object per event per line, keys sorted, UTF-8, no extra
# whitespace.  Topic labels travel by name.


def post_to_obj(post: Post) -> dict:
    return {
        "post_id": post.post_id,
        "author_pseudonym": post.author_pseudonym,
        "text": post.text,
        "tokens": list(post.tokens),
        "created_at": format_timestamp(post.created_at),
        "geotag": None
        if post.geotag is None
        else {"latitude": post.geotag.latitude, "longitude": post.geotag.longitude},
    }


def post_from_obj(obj: dict) -> Post:
    geotag = obj.get("geotag")
    return Post(
        post_id=obj["post_id"],
        author_pseudonym=obj["author_pseudonym"],
        text=obj["text"],
        tokens=tuple(obj["tokens"]),
        created_at=parse_timestamp(obj["created_at"]),
        geotag=None
        if geotag is None
        else GeoPoint(geotag["latitude"], geotag["longitude"]),
    )


def location_to_obj(loc: ResolvedLocation) -> dict:
    return {
        "granularity": loc.granularity.value,
        "poi_id": loc.poi_id,
        "neighbourhood_id": loc.neighbourhood_id,
        "latitude": loc.latitude,
        "longitude": loc.longitude,
        "confidence": loc.confidence,
    }


def location_from_obj(obj: dict) -> ResolvedLocation:
    return ResolvedLocation(
        granularity=Granularity(obj["granularity"]),
        poi_id=obj["poi_id"],
        neighbourhood_id=obj["neighbourhood_id"],
        latitude=obj["latitude"],
        longitude=obj["longitude"],
        confidence=obj["confidence"],
    )


def event_to_obj(event: ClassifiedEvent) -> dict:
    return {
        "post": post_to_obj(event.post),
        "estate_label": event.estate_label.value,
        "estate_score": event.estate_score,
        "topic_label": None
        if event.topic_label is None
        else topic_name(event.topic_label),
        "topic_scores": None
        if event.topic_scores is None
        else list(event.topic_scores),
        "location": None
        if event.location is None
        else location_to_obj(event.location),
        "pipeline_seq": event.pipeline_seq,
        "fallback": event.fallback,
    }


def event_from_obj(obj: dict) -> ClassifiedEvent:
    topic = obj.get("topic_label")
    scores = obj.get("topic_scores")
    loc = obj.get("location")
    return ClassifiedEvent(
        post=post_from_obj(obj["post"]),
        estate_label=EstateLabel(obj["estate_label"]),
        estate_score=obj["estate_score"],
        topic_label=None if topic is None else topic_from_name(topic),
        topic_scores=None if scores is None else tuple(scores),
        location=None if loc is None else location_from_obj(loc),
        pipeline_seq=obj["pipeline_seq"],
        fallback=obj.get("fallback", False),
    )


def to_canonical_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def event_to_line(event: ClassifiedEvent) -> str:
    return to_canonical_json(event_to_obj(event))


def event_from_line(line: str) -> ClassifiedEvent:
    return event_from_obj(json.loads(line))
