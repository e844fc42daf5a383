"""Physical clocks over hidden oracle time.

Every node owns a :class:`PhysicalClock` that maps global (oracle) ticks to a
local reading with a constant drift and a mutable offset. Ticks are integer
microseconds. Two views of a clock exist:

* the *wall* reading (:func:`local_time`) used for protocol timestamps, which
  jumps when the clock is synchronized, and
* the *oscillator* (:func:`oscillator`) used to measure window durations, which
  never jumps.  Timers are armed against the oscillator so synchronization can
  not stretch or shrink an open window.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, replace

PPM = 1_000_000
UNBOUNDED = sys.maxsize


@dataclass(frozen=True)
class PhysicalClock:
    offset_at_epoch: int = 0
    drift_rate: int = 0
    last_sync: int = 0

    def __post_init__(self):
        if not -PPM < self.drift_rate < PPM:
            raise ValueError(f"drift_rate must lie in (-1e6, 1e6) ppm, got {self.drift_rate}")


@dataclass(frozen=True)
class SyncAccuracy:
    gamma: int

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


def _trunc_scaled(drift_ppm: int, g: int) -> int:
    p = drift_ppm * g
    q = abs(p) // PPM
    return q if p >= 0 else -q


def local_time(clock: PhysicalClock, g: int) -> int:
    """Wall reading of ``clock`` at global tick ``g``."""
    return g + clock.offset_at_epoch + _trunc_scaled(clock.drift_rate, g)


def oscillator(clock: PhysicalClock, g: int) -> int:
    """Offset-free tick count; differences measure locally elapsed time."""
    return g + _trunc_scaled(clock.drift_rate, g)


def global_after(clock: PhysicalClock, g_start: int, duration: int) -> int:
    """Smallest global tick at which ``duration`` local ticks have elapsed since ``g_start``."""
    if duration <= 0:
        return g_start
    target = oscillator(clock, g_start) + duration
    rate = PPM + clock.drift_rate
    g = max(g_start, (target * PPM) // rate - 2)
    while oscillator(clock, g) >= target and g > g_start:
        g -= 1
    while oscillator(clock, g) < target:
        g += 1
    return g


def pairwise_offset(a: PhysicalClock, b: PhysicalClock, g: int) -> int:
    """Observer-side offset between two clocks at the same global instant."""
    return local_time(a, g) - local_time(b, g)


def cristian_sync(
    node: PhysicalClock,
    reference: PhysicalClock,
    rtt: int,
    g: int,
    reply_latency: int | None = None,
) -> PhysicalClock:
    """Cristian's probe: set ``node`` to the reference reading plus half the round trip.

    ``g`` is the instant the reply reaches ``node``. The reference stamped its
    reading ``reply_latency`` ticks earlier (symmetric split when omitted).
    The residual deviation right after the sync is at most ``ceil(rtt/2)`` plus
    the reference's drift over ``reply_latency``.
    """
    if rtt <= 0:
        raise ValueError("rtt must be positive")
    back = rtt // 2 if reply_latency is None else reply_latency
    if not 0 <= back <= rtt:
        raise ValueError("reply_latency must lie within [0, rtt]")
    estimate = local_time(reference, g - back) + rtt // 2
    current = local_time(node, g)
    return replace(node, offset_at_epoch=node.offset_at_epoch + (estimate - current), last_sync=g)


def required_sync_interval(max_relative_drift: int, gamma: int, residual: int) -> int:
    """Longest resync period keeping two clocks within ``gamma``.

    Both clocks may drift by ``max_relative_drift`` ppm in opposite directions,
    so the gap grows at twice that rate from the post-sync ``residual``.
    """
    if gamma <= residual:
        raise ValueError(f"accuracy gamma={gamma} is unachievable with residual {residual}")
    if residual < 0:
        raise ValueError("residual must be non-negative")
    if max_relative_drift <= 0:
        return UNBOUNDED
    return (gamma - residual) * PPM // (2 * max_relative_drift)


def drift_guard(drift_bound_ppm: int, span: int) -> int:
    """Ticks two windows of length ``span`` can disagree on when each clock drifts by up to the bound."""
    return math.ceil(2 * abs(drift_bound_ppm) * span / PPM) + 8
