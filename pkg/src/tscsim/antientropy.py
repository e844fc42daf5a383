"""Merkle-tree replica comparison, pairwise sync and the idle convergence sweep."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

from .protocol import ABSENT, VersionedObject, digest, object_digest

Store = Mapping[str, VersionedObject]
TieBreaker = Callable[[str, VersionedObject, VersionedObject], VersionedObject]

EMPTY = digest(b"")


def _leaf(key: str, obj_digest: str) -> str:
    return digest(b"leaf\x00" + key.encode() + b"\x00" + obj_digest.encode())


def leaf_digest(key: str, obj: VersionedObject | None) -> str:
    return _leaf(key, object_digest(obj))


@dataclass(frozen=True)
class MerkleTree:
    keys: tuple[str, ...]
    levels: tuple[tuple[str, ...], ...]  # levels[0] are the leaves, levels[-1] == (root,)

    @property
    def root(self) -> str:
        return self.levels[-1][0]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1


def merkle_build(store: Store, keys: Sequence[str] | None = None) -> MerkleTree:
    """Binary hash tree over ``keys`` (default: the store's keys) in sorted order.

    Keys missing from ``store`` contribute an absent leaf, which lets two
    replicas build trees over the union of their key sets.
    """
    chosen = store if keys is None else keys
    return merkle_from_digests({k: object_digest(store.get(k)) for k in chosen})


def merkle_from_digests(digests: Mapping[str, str], keys: Iterable[str] | None = None) -> MerkleTree:
    """Same tree, built from per-object digests (what a remote replica ships)."""
    ordered = tuple(sorted(digests if keys is None else set(keys)))
    if not ordered:
        return MerkleTree((), ((EMPTY,),))
    level = tuple(_leaf(k, digests.get(k, ABSENT)) for k in ordered)
    levels = [level]
    while len(level) > 1:
        padded = level + (EMPTY,) if len(level) % 2 else level
        level = tuple(digest((padded[i] + padded[i + 1]).encode()) for i in range(0, len(padded), 2))
        levels.append(level)
    return MerkleTree(ordered, tuple(levels))


def compare_trees(a: MerkleTree, b: MerkleTree) -> tuple[list[str], int]:
    """Descend from the roots into differing subtrees only.

    Returns the differing keys and the number of node-pair comparisons made.
    """
    if a.keys != b.keys:
        raise ValueError("trees must be built over the same key list")
    out: list[str] = []
    comparisons = 0
    stack = [(a.depth, 0)]
    while stack:
        level, idx = stack.pop()
        comparisons += 1
        if a.levels[level][idx] == b.levels[level][idx]:
            continue
        if level == 0:
            out.append(a.keys[idx])
            continue
        below = len(a.levels[level - 1])
        for child in (2 * idx + 1, 2 * idx):
            if child < below:
                stack.append((level - 1, child))
    out.sort()
    return out, comparisons


def merkle_diff(a: MerkleTree, b: MerkleTree) -> list[str]:
    return compare_trees(a, b)[0]


def source_wins(key: str, target: VersionedObject, source: VersionedObject) -> VersionedObject:
    return source


def merge_version(
    key: str,
    target: VersionedObject | None,
    source: VersionedObject | None,
    tie: TieBreaker = source_wins,
) -> VersionedObject | None:
    """Winner between two finalized versions; a newer commit is never regressed."""
    if source is None:
        return target
    if target is None or source.commit_ts > target.commit_ts:
        return source
    if source.commit_ts < target.commit_ts or source.value == target.value:
        return target
    return tie(key, target, source)


@dataclass
class SyncResult:
    store: dict[str, VersionedObject]
    transferred: list[str]
    bytes_transferred: int
    comparisons: int


def run_sync(source: Store, target: Store, tie: TieBreaker = source_wins) -> SyncResult:
    """Push ``source`` into ``target`` over the union of their keys."""
    keys = set(source) | set(target)
    changed, comparisons = compare_trees(merkle_build(source, keys), merkle_build(target, keys))
    out = dict(target)
    moved, size = [], 0
    for key in changed:
        winner = merge_version(key, target.get(key), source.get(key), tie)
        if winner is not target.get(key):
            out[key] = winner
            moved.append(key)
            size += len(winner.value)
    return SyncResult(out, moved, size, comparisons)


@dataclass
class CircleState:
    stores: list[dict[str, VersionedObject]]
    valid: list[bool]
    cursor: int = 0
    sweep_transfers: int = 0  # transfers since the cursor last passed node 0

    @property
    def size(self) -> int:
        return len(self.stores)


@dataclass
class SweepStep:
    source: int | None
    target: int | None
    result: SyncResult | None = None
    paused: bool = False
    transferred: list[str] = field(default_factory=list)


def majority_tie(circle: CircleState) -> TieBreaker:
    """Break equal-commit conflicts by the bytes a majority of valid replicas hold."""

    def tie(key: str, target: VersionedObject, source: VersionedObject) -> VersionedObject:
        votes = Counter(
            store[key].value
            for store, ok in zip(circle.stores, circle.valid)
            if ok and key in store and store[key].commit_ts == source.commit_ts
        )
        quorum = circle.size // 2 + 1
        for value, count in votes.items():
            if count >= quorum:
                return target if value == target.value else replace(source, value=value)
        return source

    return tie


def convergence_step(circle: CircleState, idle: bool) -> tuple[CircleState, SweepStep]:
    """One sync from the sweep cursor to its clockwise neighbour.

    Does nothing while the circle is busy. Pairs involving an invalid node are
    skipped, the cursor still advances.
    """
    if not idle:
        return circle, SweepStep(None, None, paused=True)
    src = circle.cursor
    dst = (src + 1) % circle.size
    nxt = replace(circle, stores=list(circle.stores), cursor=dst)
    if dst == 0:
        nxt.sweep_transfers = 0
    if not (circle.valid[src] and circle.valid[dst]):
        return nxt, SweepStep(src, dst)
    result = run_sync(circle.stores[src], circle.stores[dst], majority_tie(circle))
    nxt.stores[dst] = result.store
    nxt.sweep_transfers += len(result.transferred)
    return nxt, SweepStep(src, dst, result, transferred=list(result.transferred))


def roots(circle: CircleState) -> list[str | None]:
    return [merkle_build(s).root if ok else None for s, ok in zip(circle.stores, circle.valid)]
