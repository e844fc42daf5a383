"""Lamport and vector clocks, awareness horizons and the TCC validity test.

Also hosts a brute-force happened-before oracle over explicit event traces,
used by the test suite and by ``tscsim clocks check``.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class LamportClock:
    counter: int = 0

    def __post_init__(self):
        if self.counter < 0:
            raise ValueError("Lamport counter must be non-negative")


def lamport_event(clock: LamportClock, received: int | None = None) -> LamportClock:
    """Tick for a local event, or merge the stamp of a received message."""
    if received is None:
        return LamportClock(clock.counter + 1)
    return LamportClock(max(received, clock.counter) + 1)


@dataclass(frozen=True)
class VectorTimestamp:
    entries: tuple[int, ...]
    owner: int = 0

    def __post_init__(self):
        if not 0 <= self.owner < len(self.entries):
            raise ValueError(f"owner {self.owner} outside 0..{len(self.entries) - 1}")
        if any(e < 0 for e in self.entries):
            raise ValueError("vector entries must be non-negative")

    @classmethod
    def zero(cls, size: int, owner: int) -> "VectorTimestamp":
        return cls((0,) * size, owner)

    def __len__(self) -> int:
        return len(self.entries)


class Ordering(enum.Enum):
    LESS = "less"
    GREATER = "greater"
    EQUAL = "equal"
    CONCURRENT = "concurrent"


def _check_lengths(x: VectorTimestamp, y: VectorTimestamp) -> None:
    if len(x.entries) != len(y.entries):
        raise ValueError(f"vector length mismatch: {len(x.entries)} vs {len(y.entries)}")


def vector_event(ts: VectorTimestamp, received: VectorTimestamp | None = None) -> VectorTimestamp:
    entries = list(ts.entries)
    if received is not None:
        _check_lengths(ts, received)
        entries = [max(a, b) for a, b in zip(entries, received.entries)]
    entries[ts.owner] += 1
    return VectorTimestamp(tuple(entries), ts.owner)


def vector_compare(x: VectorTimestamp, y: VectorTimestamp) -> Ordering:
    _check_lengths(x, y)
    le = all(a <= b for a, b in zip(x.entries, y.entries))
    ge = all(a >= b for a, b in zip(x.entries, y.entries))
    if le and ge:
        return Ordering.EQUAL
    if le:
        return Ordering.LESS
    if ge:
        return Ordering.GREATER
    return Ordering.CONCURRENT


def awareness_horizon(ts: VectorTimestamp | Sequence[int]) -> int:
    entries = ts.entries if isinstance(ts, VectorTimestamp) else ts
    return sum(entries)


def tcc_valid(xi_s: int, xi_i: int, delta: int) -> bool:
    """True when the object's logical staleness ``xi_s - xi_i`` is within ``delta``."""
    if xi_s < xi_i:
        raise ValueError(f"xi_s={xi_s} is behind xi_i={xi_i}")
    if xi_i < 0:
        raise ValueError("awareness horizons are non-negative")
    return xi_s - xi_i <= delta


# --- event traces ---------------------------------------------------------


@dataclass(frozen=True)
class TraceEvent:
    """One process step; ``msg`` links a ``send`` to its ``recv``."""

    process: int
    action: str  # "local" | "send" | "recv"
    msg: str | None = None


@dataclass
class ClockCheck:
    events: int
    pairs: int
    vector_mismatches: int
    lamport_violations: int

    @property
    def ok(self) -> bool:
        return self.vector_mismatches == 0 and self.lamport_violations == 0


def stamp_trace(events: Sequence[TraceEvent], processes: int):
    """Replay ``events`` through vector and Lamport clocks.

    Returns per-event vector timestamps and Lamport counters. A receive whose
    send has not yet happened is rejected.
    """
    vectors = [VectorTimestamp.zero(processes, p) for p in range(processes)]
    lamports = [LamportClock() for _ in range(processes)]
    sent: dict[str, tuple[VectorTimestamp, int]] = {}
    out_v, out_l = [], []
    for ev in events:
        p = ev.process
        if ev.action == "recv":
            if ev.msg not in sent:
                raise ValueError(f"receive of unknown message {ev.msg!r}")
            v_msg, l_msg = sent[ev.msg]
            vectors[p] = vector_event(vectors[p], v_msg)
            lamports[p] = lamport_event(lamports[p], l_msg)
        else:
            vectors[p] = vector_event(vectors[p])
            lamports[p] = lamport_event(lamports[p])
            if ev.action == "send":
                sent[ev.msg] = (vectors[p], lamports[p].counter)
        out_v.append(vectors[p])
        out_l.append(lamports[p].counter)
    return out_v, out_l


def happened_before(events: Sequence[TraceEvent]) -> list[int]:
    """Transitive closure of program order plus send->recv edges.

    ``result[j]`` is a bitmask of every event index ``i`` with ``i -> j``.
    """
    preds = [0] * len(events)
    last: dict[int, int] = {}
    send_at: dict[str, int] = {}
    for j, ev in enumerate(events):
        mask = 0
        if ev.process in last:
            i = last[ev.process]
            mask |= preds[i] | (1 << i)
        if ev.action == "recv":
            i = send_at[ev.msg]
            mask |= preds[i] | (1 << i)
        elif ev.action == "send":
            send_at[ev.msg] = j
        preds[j] = mask
        last[ev.process] = j
    return preds


def check_trace(events: Sequence[TraceEvent], processes: int) -> ClockCheck:
    """Compare clock verdicts with brute-force happened-before on every ordered pair."""
    vectors, lamports = stamp_trace(events, processes)
    preds = happened_before(events)
    vec_bad = lam_bad = pairs = 0
    for j in range(len(events)):
        for i in range(j):
            pairs += 1
            i_before_j = bool(preds[j] >> i & 1)
            order = vector_compare(vectors[i], vectors[j])
            if i_before_j:
                vec_bad += order is not Ordering.LESS
                lam_bad += not lamports[i] < lamports[j]
            else:
                # j cannot precede i since i occurs earlier in the trace
                vec_bad += order is not Ordering.CONCURRENT
    return ClockCheck(len(events), pairs, vec_bad, lam_bad)


def random_trace(rng: random.Random, max_processes: int = 8, max_events: int = 50) -> tuple[list[TraceEvent], int]:
    processes = rng.randint(1, max_processes)
    length = rng.randint(1, max_events)
    events: list[TraceEvent] = []
    in_flight: list[tuple[str, int]] = []
    for k in range(length):
        p = rng.randrange(processes)
        roll = rng.random()
        if in_flight and roll < 0.35:
            msg, _ = in_flight.pop(rng.randrange(len(in_flight)))
            events.append(TraceEvent(p, "recv", msg))
        elif roll < 0.7:
            msg = f"m{k}"
            in_flight.append((msg, p))
            events.append(TraceEvent(p, "send", msg))
        else:
            events.append(TraceEvent(p, "local"))
    return events, processes


def processes_in(events: Iterable[TraceEvent]) -> int:
    return 1 + max((ev.process for ev in events), default=0)
