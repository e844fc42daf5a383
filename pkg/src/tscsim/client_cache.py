"""Client-side lifetime cache with if-modified-since revalidation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Any, Mapping

from .protocol import CommitTimestamp


class EntryState(enum.Enum):
    FRESH = "fresh"
    OLD = "old"


@dataclass(frozen=True)
class CacheEntry:
    object_id: str
    value: Any
    start_time: int
    ending_time: int
    state: EntryState = EntryState.FRESH
    version: CommitTimestamp | None = None

    def __post_init__(self):
        if self.start_time >= self.ending_time:
            raise ValueError("a cache lifetime must have positive length")


@dataclass(frozen=True)
class ClientTiming:
    delta_client: int
    delta_network: int
    delta_data: int

    def __post_init__(self):
        if min(self.delta_client, self.delta_network, self.delta_data) < 0:
            raise ValueError("client timing values must be non-negative")


Cache = Mapping[str, CacheEntry]


@dataclass(frozen=True)
class Hit:
    value: Any
    entry: CacheEntry


@dataclass(frozen=True)
class NeedsRevalidation:
    entry: CacheEntry


class Miss:
    def __repr__(self):
        return "Miss()"


MISS = Miss()


def cache_read(cache: Cache, object_id: str, now: int) -> Hit | NeedsRevalidation | Miss:
    entry = cache.get(object_id)
    if entry is None:
        return MISS
    if entry.state is EntryState.FRESH and now < entry.ending_time:
        return Hit(entry.value, entry)
    return NeedsRevalidation(entry)


class NotModified:
    def __repr__(self):
        return "NotModified()"


NOT_MODIFIED = NotModified()


@dataclass(frozen=True)
class NewValue:
    value: Any
    version: CommitTimestamp | None = None


def revalidate(
    cache: Cache,
    object_id: str,
    now: int,
    answer: NotModified | NewValue,
    delta_client: int,
) -> dict[str, CacheEntry]:
    """Start a fresh lifetime ``[now, now + delta_client)`` for ``object_id``."""
    out = dict(cache)
    entry = cache.get(object_id)
    if isinstance(answer, NotModified):
        if entry is None:
            raise ValueError(f"NotModified for uncached object {object_id!r}")
        out[object_id] = replace(entry, start_time=now, ending_time=now + delta_client, state=EntryState.FRESH)
    else:
        out[object_id] = CacheEntry(object_id, answer.value, now, now + delta_client, EntryState.FRESH, answer.version)
    return out


def answer_for(entry: CacheEntry | None, value: Any, version: CommitTimestamp | None) -> NotModified | NewValue:
    """Server side of if-modified-since: only a strictly newer version is sent."""
    if entry is not None and entry.version is not None and (version is None or version <= entry.version):
        return NOT_MODIFIED
    return NewValue(value, version)


def mark_old(cache: Cache) -> dict[str, CacheEntry]:
    """Temporary self-invalidation: every entry needs revalidation before use."""
    return {k: replace(e, state=EntryState.OLD) for k, e in cache.items()}


def mutually_consistent(cache: Cache, now: int | None = None) -> bool:
    """Whether some instant lies inside every entry's lifetime."""
    if not cache:
        raise ValueError("mutual consistency is undefined for an empty cache")
    latest_start = max(e.start_time for e in cache.values())
    earliest_end = min(e.ending_time for e in cache.values())
    return latest_start < earliest_end


class TemporarilyInvalid:
    def __repr__(self):
        return "TemporarilyInvalid()"


TEMPORARILY_INVALID = TemporarilyInvalid()


def reply_in_time(sent_at: int, replied_at: int | None, delta_network: int) -> bool:
    """A reply landing exactly on the deadline is late."""
    return replied_at is not None and replied_at - sent_at < delta_network


def timed_read(
    cache: Cache,
    object_id: str,
    sent_at: int,
    replied_at: int | None,
    value: Any,
    version: CommitTimestamp | None,
    timing: ClientTiming,
):
    """Resolve one network read issued at ``sent_at``.

    Returns ``(cache', value)`` on a timely reply, where ``value`` is the
    cached one if the reply was not newer, and
    ``(cache', TEMPORARILY_INVALID)`` otherwise, in which case every entry has
    been demoted to old.
    """
    if not reply_in_time(sent_at, replied_at, timing.delta_network):
        return mark_old(cache), TEMPORARILY_INVALID
    answer = answer_for(cache.get(object_id), value, version)
    out = revalidate(cache, object_id, replied_at, answer, timing.delta_client)
    return out, out[object_id].value


def delta_update_bound(t: ClientTiming) -> int:
    return t.delta_data + t.delta_client + t.delta_network


def delta_update_worst_case(delta_data: int, delta_client: int, l_read: int, l_value: int) -> int:
    """Unconsolidated bound with the request and value transfer latencies spelled out."""
    return delta_data + delta_client + l_read + l_value
