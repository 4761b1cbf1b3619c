"""Post ingestion: batch files or live record streams.

Raw records carry platform author handles; everything downstream sees
only deterministic keyed pseudonyms (HMAC-SHA256 truncated to 128 bits).
Same handle + same key always maps to the same pseudonym, so a user's
posts stay linkable without being mappable back to the handle.
"""

import hashlib
import hmac
import json
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Union

from .errors import EmptyCorpusError, ValidationError
from .types import (
    Corpus,
    EstateLabel,
    GeoPoint,
    Post,
    parse_timestamp,
    post_from_obj,
    post_to_obj,
    to_canonical_json,
    TopicLabel,
    topic_from_name,
    topic_name,
)

PSEUDONYM_KEY_ENV = "PSEUDONYM_KEY"
MIN_KEY_BYTES = 16


@dataclass(frozen=True)
class RawPost:
    post_id: str
    author_handle: str
    text: str
    created_at: str
    latitude: Optional[float] = None
    longitude: Optional[float] = None


@dataclass(frozen=True)
class PseudonymKey:
    """Secret HMAC key; never serialized into any record or log."""

    key_bytes: bytes

    def __post_init__(self):
        if len(self.key_bytes) < MIN_KEY_BYTES:
            raise ValidationError(
                f"pseudonym key must be at least {MIN_KEY_BYTES} bytes"
            )

    def __repr__(self) -> str:  # keep the secret out of tracebacks and logs
        return "PseudonymKey(<redacted>)"

    @classmethod
    def from_hex(cls, value: str) -> "PseudonymKey":
        try:
            return cls(bytes.fromhex(value.strip()))
        except ValueError:
            raise ValidationError("pseudonym key must be hex-encoded") from None

    @classmethod
    def from_env(cls, var: str = PSEUDONYM_KEY_ENV) -> "PseudonymKey":
        value = os.environ.get(var)
        if not value:
            raise ValidationError(f"environment variable {var} is not set")
        return cls.from_hex(value)


def pseudonymize(handle: str, key: PseudonymKey) -> str:
    """Keyed one-way pseudonym: 32 lowercase hex chars (128 bits)."""
    if not handle:
        raise ValidationError("author handle must be non-empty")
    digest = hmac.new(key.key_bytes, handle.encode("utf-8"), hashlib.sha256)
    return digest.hexdigest()[:32]


# Batch/stream record schema: one JSON object per line with fields
# id, user, text, created_at (RFC 3339), and optional lat/lon.


def normalize_record(obj: dict, key: PseudonymKey) -> Post:
    if not isinstance(obj, dict):
        raise ValidationError("record is not a JSON object")
    post_id = str(obj.get("id", "")).strip()
    text = str(obj.get("text", "")).strip()
    handle = str(obj.get("user", ""))
    if not post_id:
        raise ValidationError("record has an empty id")
    if not text:
        raise ValidationError(f"record {post_id}: empty text")
    created_at = parse_timestamp(str(obj.get("created_at", "")))
    lat, lon = obj.get("lat"), obj.get("lon")
    if (lat is None) != (lon is None):
        raise ValidationError(f"record {post_id}: lat/lon must come together")
    geotag = None if lat is None else GeoPoint(float(lat), float(lon))
    return Post.build(
        post_id=post_id,
        author_pseudonym=pseudonymize(handle, key),
        text=text,
        created_at=created_at,
        geotag=geotag,
    )


def normalize_raw_post(raw: RawPost, key: PseudonymKey) -> Post:
    return normalize_record(
        {
            "id": raw.post_id,
            "user": raw.author_handle,
            "text": raw.text,
            "created_at": raw.created_at,
            "lat": raw.latitude,
            "lon": raw.longitude,
        },
        key,
    )


@dataclass(frozen=True)
class BatchResult:
    corpus: Corpus
    skipped: int


def ingest_batch(path, key: PseudonymKey) -> BatchResult:
    """Read a newline-delimited JSON file of raw records.

    Malformed lines are skipped and counted; zero parseable lines is an
    error.  The returned corpus is in canonical order and contains no
    raw handles.
    """
    posts: list[Post] = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                posts.append(normalize_record(json.loads(line), key))
            except (ValidationError, ValueError):
                skipped += 1
    if not posts:
        raise EmptyCorpusError(f"no parseable posts in {path}")
    return BatchResult(corpus=Corpus.build(posts), skipped=skipped)


@dataclass(frozen=True)
class StreamSummary:
    accepted: int
    rejected: int


RawRecord = Union[RawPost, dict, str, bytes]


def ingest_stream(
    source: Iterable[RawRecord],
    key: PseudonymKey,
    sink: Callable[[Post], None],
) -> StreamSummary:
    """Deliver each valid record to the sink exactly once, in arrival order.

    The sink is invoked synchronously, so a slow consumer blocks the
    reader instead of dropping records.  Parse failures only bump the
    rejected count; source exhaustion ends the stream cleanly.
    """
    accepted = rejected = 0
    for record in source:
        try:
            if isinstance(record, RawPost):
                post = normalize_raw_post(record, key)
            else:
                if isinstance(record, bytes):
                    record = record.decode("utf-8")
                if isinstance(record, str):
                    record = json.loads(record)
                post = normalize_record(record, key)
        except (ValidationError, ValueError):
            rejected += 1
            continue
        sink(post)
        accepted += 1
    return StreamSummary(accepted=accepted, rejected=rejected)


# Normalized corpus files: one post object per line (the canonical Post
# JSON), with optional per-line gold_estate / gold_topic / gold_location
# fields.  Loading a saved corpus reproduces it exactly.


def corpus_lines(corpus: Corpus):
    """Serialized post lines, gold labels embedded where present."""
    for post in corpus.posts:
        obj = post_to_obj(post)
        if corpus.gold_estate and post.post_id in corpus.gold_estate:
            obj["gold_estate"] = corpus.gold_estate[post.post_id].value
        if corpus.gold_topic and post.post_id in corpus.gold_topic:
            obj["gold_topic"] = topic_name(corpus.gold_topic[post.post_id])
        if corpus.gold_location and post.post_id in corpus.gold_location:
            point = corpus.gold_location[post.post_id]
            obj["gold_location"] = {
                "latitude": point.latitude,
                "longitude": point.longitude,
            }
        yield to_canonical_json(obj)


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in corpus_lines(corpus):
            fh.write(line + "\n")


def load_corpus(path) -> Corpus:
    posts: list[Post] = []
    gold_estate: dict[str, EstateLabel] = {}
    gold_topic: dict[str, TopicLabel] = {}
    gold_location: dict[str, GeoPoint] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            post = post_from_obj(obj)
            posts.append(post)
            if "gold_estate" in obj:
                gold_estate[post.post_id] = EstateLabel(obj["gold_estate"])
            if "gold_topic" in obj:
                gold_topic[post.post_id] = topic_from_name(obj["gold_topic"])
            if "gold_location" in obj:
                loc = obj["gold_location"]
                gold_location[post.post_id] = GeoPoint(
                    loc["latitude"], loc["longitude"]
                )
    if not posts:
        raise EmptyCorpusError(f"no posts in {path}")
    return Corpus.build(
        posts,
        gold_estate=gold_estate or None,
        gold_topic=gold_topic or None,
        gold_location=gold_location or None,
    )


def load_key(source: Optional[str] = None) -> PseudonymKey:
    """Resolve the pseudonym key from a file path or the environment.

    `source` may be a path to a hex key file or an environment variable
    name; None means the default PSEUDONYM_KEY variable.
    """
    if source is None:
        return PseudonymKey.from_env()
    if os.path.exists(source):
        with open(source, "r", encoding="utf-8") as fh:
            return PseudonymKey.from_hex(fh.read())
    return PseudonymKey.from_env(source)
