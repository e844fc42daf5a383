"""Fault schedule: partitions, crashes and silent on-disk corruption."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union


@dataclass(frozen=True)
class Partition:
    nodes: frozenset[int]
    start: int
    end: int | None = None  # None: never heals

    def active(self, g: int) -> bool:
        return self.start <= g and (self.end is None or g < self.end)

    def cuts(self, a: int, b: int) -> bool:
        return (a in self.nodes) != (b in self.nodes)


@dataclass(frozen=True)
class Crash:
    node: int
    start: int
    end: int | None = None

    def active(self, g: int) -> bool:
        return self.start <= g and (self.end is None or g < self.end)


@dataclass(frozen=True)
class Corrupt:
    node: int
    object_id: str
    byte: int
    at: int


Fault = Union[Partition, Crash, Corrupt]


def fault_start(f: Fault) -> int:
    return f.at if isinstance(f, Corrupt) else f.start


def crashed(faults: Iterable[Fault], node: int, g: int) -> bool:
    return any(isinstance(f, Crash) and f.node == node and f.active(g) for f in faults)


def link_up(faults: Iterable[Fault], a: int, b: int, g: int) -> bool:
    """A link is down if any active partition separates the ends or either end is crashed.

    Overlapping partitions compose by union: each one cuts its own links.
    """
    for f in faults:
        if isinstance(f, Partition):
            if f.active(g) and f.cuts(a, b):
                return False
        elif isinstance(f, Crash) and f.node in (a, b) and f.active(g):
            return False
    return True


def check_fault(f: Fault, nodes: int, horizon: int) -> None:
    members = f.nodes if isinstance(f, Partition) else {f.node}
    for n in members:
        if not 0 <= n < nodes:
            raise ValueError(f"fault names node {n}, circle has {nodes}")
    start = fault_start(f)
    end = getattr(f, "end", None)
    if start < 0 or start > horizon:
        raise ValueError(f"fault starts at {start}, outside [0, {horizon}]")
    if end is not None and not start < end <= horizon:
        raise ValueError(f"fault interval [{start}, {end}) is empty or exceeds horizon {horizon}")


def merge_faults(faults: Iterable[Fault], extra: Fault) -> tuple[Fault, ...]:
    """Deterministic schedule order: by start time, then by representation."""
    return tuple(sorted((*faults, extra), key=lambda f: (fault_start(f), repr(f))))
