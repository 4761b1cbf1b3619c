"""Durable append-only event store with idempotent writes.

Store layout on disk: a directory holding `events.log` and a `LOCK`
file.  The log is a sequence of frames:

    u32 payload length (big-endian)
  | payload: canonical event JSON, UTF-8
  | u32 CRC32 of the payload (big-endian)

A torn final frame (interrupted append) is detected by the checksum or
by running out of bytes, truncated away on recovery, and reported.  A
checksum failure with intact frames after it means real corruption and
refuses to open.  Indexes are in-memory and rebuilt on open; events are
immutable observations, so there are no deletes and no compaction.
"""

import bisect
import dataclasses
import os
import struct
import threading
import zlib
from dataclasses import dataclass
from datetime import datetime
from typing import Iterator, Optional

from .errors import (
    CorruptionError,
    DurableWriteError,
    StoreLockedError,
    ValidationError,
)
from .types import ClassifiedEvent, TopicLabel, event_from_line, event_to_line

try:
    import fcntl
except ImportError:  # non-POSIX: fall back to lock-file existence only
    fcntl = None

LOG_NAME = "events.log"
LOCK_NAME = "LOCK"
_HEADER = struct.Struct(">I")


@dataclass(frozen=True)
class RecoveryInfo:
    records: int
    truncated: bool
    dropped_bytes: int


@dataclass(frozen=True)
class QueryFilter:
    topic: Optional[TopicLabel] = None
    time_from: Optional[datetime] = None
    time_to: Optional[datetime] = None
    neighbourhood: Optional[str] = None
    estate_only: bool = False

    def __post_init__(self):
        if (
            self.time_from is not None
            and self.time_to is not None
            and self.time_from > self.time_to
        ):
            raise ValidationError("time_from must not exceed time_to")

    def matches(self, event: ClassifiedEvent) -> bool:
        if self.topic is not None and event.topic_label is not self.topic:
            return False
        if self.time_from is not None and event.post.created_at < self.time_from:
            return False
        if self.time_to is not None and event.post.created_at > self.time_to:
            return False
        if self.neighbourhood is not None:
            if (
                event.location is None
                or event.location.neighbourhood_id != self.neighbourhood
            ):
                return False
        if self.estate_only and event.estate_label.value != 1:
            return False
        return True


class EventStore:
    """Single appender, many readers.  Open via EventStore.open/recover."""

    def __init__(self, directory: str):
        self._dir = directory
        self._log_path = os.path.join(directory, LOG_NAME)
        self._events: list[ClassifiedEvent] = []
        self._by_post: dict[str, int] = {}
        self._by_topic: dict[TopicLabel, list[int]] = {}
        self._by_time: list[tuple[datetime, int]] = []  # sorted by timestamp
        self._mutex = threading.Lock()
        self._fh = None
        self._lock_fh = None
        self.recovery = RecoveryInfo(records=0, truncated=False, dropped_bytes=0)

    # -- lifecycle --------------------------------------------------------

    @classmethod
    def open(cls, directory) -> "EventStore":
        directory = os.fspath(directory)
        os.makedirs(directory, exist_ok=True)
        store = cls(directory)
        store._acquire_lock()
        try:
            store._replay()
            store._fh = open(store._log_path, "ab")
        except BaseException:
            store._release_lock()
            raise
        return store

    def close(self) -> None:
        with self._mutex:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
            self._release_lock()

    def __enter__(self) -> "EventStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _acquire_lock(self) -> None:
        path = os.path.join(self._dir, LOCK_NAME)
        self._lock_fh = open(path, "a+b")
        if fcntl is not None:
            try:
                fcntl.flock(self._lock_fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
            except OSError:
                self._lock_fh.close()
                self._lock_fh = None
                raise StoreLockedError(
                    f"store {self._dir} is locked by another appender"
                ) from None

    def _release_lock(self) -> None:
        if self._lock_fh is not None:
            if fcntl is not None:
                fcntl.flock(self._lock_fh, fcntl.LOCK_UN)
            self._lock_fh.close()
            self._lock_fh = None

    # -- recovery ---------------------------------------------------------

    def _replay(self) -> None:
        if not os.path.exists(self._log_path):
            open(self._log_path, "wb").close()
            return
        with open(self._log_path, "rb") as fh:
            data = fh.read()
        offset = 0
        good_end = 0
        while offset < len(data):
            frame = _try_frame(data, offset)
            if frame is None:
                break
            payload, next_offset = frame
            try:
                event = event_from_line(payload.decode("utf-8"))
            except (ValueError, ValidationError):
                # checksum passed but payload is not an event record
                raise CorruptionError(len(self._events))
            self._index_event(event)
            offset = next_offset
            good_end = next_offset
        if good_end < len(data):
            # Invalid frame: if a valid frame follows the claimed extent,
            # the middle of the log is corrupt; otherwise it is a torn tail.
            claimed = _claimed_end(data, good_end)
            if claimed is not None and _try_frame(data, claimed) is not None:
                raise CorruptionError(len(self._events))
            dropped = len(data) - good_end
            with open(self._log_path, "r+b") as fh:
                fh.truncate(good_end)
            self.recovery = RecoveryInfo(
                records=len(self._events), truncated=True, dropped_bytes=dropped
            )
        else:
            self.recovery = RecoveryInfo(
                records=len(self._events), truncated=False, dropped_bytes=0
            )

    def _index_event(self, event: ClassifiedEvent) -> None:
        seq = len(self._events)
        self._events.append(event)
        self._by_post[event.post.post_id] = seq
        if event.topic_label is not None:
            self._by_topic.setdefault(event.topic_label, []).append(seq)
        bisect.insort(self._by_time, (event.post.created_at, seq))

    # -- write path -------------------------------------------------------

    def append(self, event: ClassifiedEvent) -> int:
        """Durably append one event; idempotent on post_id."""
        with self._mutex:
            if self._fh is None:
                raise ValidationError("store is closed")
            existing = self._by_post.get(event.post.post_id)
            if existing is not None:
                return existing
            seq = len(self._events)
            record = dataclasses.replace(event, pipeline_seq=seq)
            payload = event_to_line(record).encode("utf-8")
            frame = (
                _HEADER.pack(len(payload))
                + payload
                + _HEADER.pack(zlib.crc32(payload))
            )
            start = self._fh.tell()
            try:
                self._fh.write(frame)
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except OSError as exc:
                try:  # keep the store consistent at the last good record
                    self._fh.truncate(start)
                except OSError:
                    pass
                raise DurableWriteError(seq - 1, exc) from exc
            self._index_event(record)
            return seq

    # -- read path --------------------------------------------------------

    @property
    def high_water(self) -> int:
        """Highest assigned sequence number, -1 when empty."""
        return len(self._events) - 1

    def __len__(self) -> int:
        return len(self._events)

    def events(self) -> Iterator[ClassifiedEvent]:
        return iter(list(self._events))

    def get(self, seq: int) -> ClassifiedEvent:
        return self._events[seq]

    def seq_for_post(self, post_id: str) -> Optional[int]:
        return self._by_post.get(post_id)

    def query(
        self, flt: QueryFilter, after_seq: int = -1, limit: Optional[int] = None
    ) -> list[ClassifiedEvent]:
        """Events matching all supplied filters, in sequence order.

        `after_seq`/`limit` support cursor pagination; the result equals
        a full scan with the same predicate.
        """
        candidates = self._candidate_seqs(flt)
        out: list[ClassifiedEvent] = []
        for seq in candidates:
            if seq <= after_seq:
                continue
            event = self._events[seq]
            if flt.matches(event):
                out.append(event)
                if limit is not None and len(out) >= limit:
                    break
        return out

    def _candidate_seqs(self, flt: QueryFilter) -> list[int]:
        # narrow by the most selective available index, then re-filter
        if flt.topic is not None:
            return self._by_topic.get(flt.topic, [])
        if flt.time_from is not None or flt.time_to is not None:
            lo = (
                0
                if flt.time_from is None
                else bisect.bisect_left(self._by_time, (flt.time_from, -1))
            )
            hi = (
                len(self._by_time)
                if flt.time_to is None
                else bisect.bisect_right(self._by_time, (flt.time_to, float("inf")))
            )
            return sorted(seq for _, seq in self._by_time[lo:hi])
        return list(range(len(self._events)))


def recover(path) -> EventStore:
    """Open a store directory, repairing a torn tail if one exists."""
    return EventStore.open(path)


def _claimed_end(data: bytes, offset: int) -> Optional[int]:
    if offset + _HEADER.size > len(data):
        return None
    (length,) = _HEADER.unpack_from(data, offset)
    end = offset + _HEADER.size + length + _HEADER.size
    return end if end <= len(data) else None


def _try_frame(data: bytes, offset: int) -> Optional[tuple[bytes, int]]:
    """Parse one frame at `offset`; None when incomplete or checksum fails."""
    end = _claimed_end(data, offset)
    if end is None:
        return None
    (length,) = _HEADER.unpack_from(data, offset)
    payload = data[offset + _HEADER.size : offset + _HEADER.size + length]
    (crc,) = _HEADER.unpack_from(data, end - _HEADER.size)
    if zlib.crc32(payload) != crc:
        return None
    return payload, end
