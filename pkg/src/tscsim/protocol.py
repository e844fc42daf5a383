"""Quorum and timing configuration plus the value-level write rules."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable

# validate_timing warns unless alpha < beta / ALPHA_RATIO
ALPHA_RATIO = 10

WriteId = tuple[int, int]  # (triggering node, per-node sequence number)


class ConfigError(ValueError):
    """A configuration value violates a protocol invariant."""


@dataclass(frozen=True)
class QuorumConfig:
    n: int

    @property
    def N(self) -> int:
        return 2 * self.n + 1

    @property
    def R(self) -> int:
        return self.n + 1

    @property
    def W(self) -> int:
        return self.n + 1


def quorum_config(n: int) -> QuorumConfig:
    if n < 1:
        raise ConfigError(f"n must be at least 1 (got {n}); a single node is not a replicated circle")
    return QuorumConfig(n)


@dataclass(frozen=True)
class TimingConfig:
    delta: int
    alpha: int
    beta: int
    omega: int
    gamma: int


@dataclass
class TimingCheck:
    ok: bool
    warnings: list[str]


def validate_timing(cfg: TimingConfig) -> TimingCheck:
    """Raise on hard violations; report the alpha << beta heuristic as a warning."""
    for name in ("alpha", "beta", "omega", "gamma"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"{name} must be positive")
    if cfg.alpha + cfg.beta != cfg.delta:
        raise ConfigError(f"alpha + beta != delta ({cfg.alpha} + {cfg.beta} != {cfg.delta})")
    warnings = []
    if cfg.alpha * ALPHA_RATIO >= cfg.beta:
        warnings.append(f"alpha={cfg.alpha} is not << beta={cfg.beta} (want alpha < beta/{ALPHA_RATIO})")
    return TimingCheck(True, warnings)


def alpha_ideal(latency: int, processing: int) -> int:
    """Confirmation window for constant one-way latency and processing delay."""
    if latency < 0 or processing < 0:
        raise ValueError("latency and processing must be non-negative")
    return 2 * latency + processing


def max_possible_latency(t_send: int, t_recv: int, gamma: int) -> int:
    d = t_recv - t_send
    return max(0, d - gamma, d + gamma)


def valid_write_check(t_send: int, t_recv: int, gamma: int, alpha: int) -> bool:
    """Accept a write request only if its worst-case true latency fits in alpha.

    ``t_send`` is the trigger's stamp, ``t_recv`` the receiver's local reading;
    with clocks within ``gamma`` the true latency lies in
    ``[max(0, d - gamma), d + gamma]`` for ``d = t_recv - t_send``.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return max_possible_latency(t_send, t_recv, gamma) <= alpha


@dataclass(frozen=True, order=True)
class CommitTimestamp:
    value: int
    write_id: WriteId

    @property
    def tie_break(self) -> WriteId:
        return self.write_id

    def encode(self) -> bytes:
        node, seq = self.write_id
        return f"{self.value}:{node}:{seq}".encode()


def commit_timestamp(
    t_send: int,
    receipts: Iterable[int],
    write_id: WriteId,
    floor: int | None = None,
) -> CommitTimestamp:
    """Smallest tick strictly above the send stamp and every receipt.

    ``floor`` lets a client session push the value past its previous write.
    """
    receipts = list(receipts)
    if not receipts:
        raise ValueError("commit needs at least one confirmation receipt")
    top = max(t_send, *receipts)
    if floor is not None:
        top = max(top, floor)
    return CommitTimestamp(top + 1, write_id)


ABSENT = "absent"
DIGEST_SIZE = 8


def digest(data: bytes, size: int = DIGEST_SIZE) -> str:
    return hashlib.blake2b(data, digest_size=size).hexdigest()


@dataclass(frozen=True)
class VersionedObject:
    object_id: str
    value: bytes
    commit_ts: CommitTimestamp
    finalized: bool = True

    def key(self) -> CommitTimestamp:
        return self.commit_ts

    def digest(self, size: int = DIGEST_SIZE) -> str:
        return digest(self.value + b"\x00" + self.commit_ts.encode(), size)


def object_digest(obj: VersionedObject | None, size: int = DIGEST_SIZE) -> str:
    return ABSENT if obj is None else obj.digest(size)
