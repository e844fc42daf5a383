"""Link latency distributions and per-node processing delay."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping

KINDS = {"constant": 1, "uniform": 2, "triangular": 3}


@dataclass(frozen=True)
class LatencyModel:
    kind: str = "constant"
    params: tuple[int, ...] = (0,)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown latency kind {self.kind!r}")
        if len(self.params) != KINDS[self.kind]:
            raise ValueError(f"{self.kind} latency takes {KINDS[self.kind]} parameter(s), got {len(self.params)}")
        if any(p < 0 for p in self.params):
            raise ValueError("latency parameters must be non-negative")
        if list(self.params) != sorted(self.params):
            raise ValueError(f"{self.kind} latency parameters must be ordered lo <= mode <= hi")

    @property
    def upper(self) -> int:
        return self.params[-1]

    def sample(self, rng: random.Random) -> int:
        p = self.params
        if self.kind == "constant":
            return p[0]
        if self.kind == "uniform":
            return rng.randint(p[0], p[1])
        return round(rng.triangular(p[0], p[2], p[1]))


def constant(c: int) -> LatencyModel:
    return LatencyModel("constant", (c,))


def uniform(lo: int, hi: int) -> LatencyModel:
    return LatencyModel("uniform", (lo, hi))


def triangular(lo: int, mode: int, hi: int) -> LatencyModel:
    return LatencyModel("triangular", (lo, mode, hi))


@dataclass(frozen=True)
class Network:
    default: LatencyModel
    links: Mapping[tuple[int, int], LatencyModel] = field(default_factory=dict)
    processing: tuple[int, ...] = ()

    def model(self, src: int, dst: int) -> LatencyModel:
        return self.links.get((src, dst), self.default)

    def transit(self, src: int, dst: int, rng: random.Random) -> int:
        """Sampled wire latency plus the receiver's processing delay."""
        proc = self.processing[dst] if dst < len(self.processing) else 0
        return self.model(src, dst).sample(rng) + proc
