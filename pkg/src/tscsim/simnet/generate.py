"""Scenario generators: randomized fault-heavy runs and small failure-free ones."""

from __future__ import annotations

import random

from ..node import Kind
from ..scenario import ClientSpec, ClockSpec, Op, Scenario, Timing
from .faults import Corrupt, Crash, Partition
from .latency import constant, triangular, uniform

DROPPABLE = tuple(k.value for k in Kind if k is not Kind.SYNC_PROBE)

RANDOM_TIMING = Timing(
    delta=100_000,
    alpha=5_000,
    beta=95_000,
    omega=20_000,
    gamma=1_000,
    sync_interval=50_000,
    sync_max_rtt=800,
    idle_ticks=150_000,
    revalidation_retry=25_000,
)


def randomized_scenario(seed: int, *, ops_per_client: int = 6, horizon: int = 600_000) -> Scenario:
    """Triangular latencies straddling alpha, drifting clocks, random drops and faults."""
    rng = random.Random(f"scenario:{seed}")
    t = RANDOM_TIMING
    size = 5
    clocks = tuple(ClockSpec(rng.randint(-200, 200), rng.randint(-20, 20)) for _ in range(size))
    keys = [f"k{i}" for i in range(rng.randint(2, 3))]
    last_op = horizon - 3 * t.delta
    clients = []
    workload = []
    for c in range(rng.randint(2, 3)):
        cid = f"c{c}"
        clients.append(ClientSpec(cid, rng.randrange(size), 50_000, 30_000, uniform(100, 2_000)))
        for k in range(ops_per_client):
            op = "write" if rng.random() < 0.5 else "read"
            workload.append(
                Op(rng.randint(0, last_op), cid, op, rng.choice(keys), f"{cid}-{k}" if op == "write" else None)
            )
    workload.sort(key=lambda o: (o.at, o.client))
    faults = []
    for _ in range(rng.randint(0, 2)):
        start = rng.randint(0, last_op)
        end = None if rng.random() < 0.2 else start + rng.randint(1_000, 2 * t.delta)
        faults.append(Crash(rng.randrange(size), start, min(end, horizon) if end else None))
    if rng.random() < 0.5:
        start = rng.randint(0, last_op)
        members = frozenset(rng.sample(range(size), rng.randint(1, 2)))
        faults.append(Partition(members, start, min(horizon, start + rng.randint(1_000, t.delta))))
    if rng.random() < 0.3:
        faults.append(Corrupt(rng.randrange(size), rng.choice(keys), rng.randint(0, 3), rng.randint(0, horizon - 1)))
    drops = tuple((k, round(rng.uniform(0.0, 0.2), 4)) for k in DROPPABLE)
    return Scenario(
        n=2,
        timing=t,
        clocks=clocks,
        latency=triangular(200, 1_500, 6_000),
        sync_latency=uniform(100, 450),
        processing=tuple(rng.randint(0, 200) for _ in range(size)),
        clients=tuple(clients),
        workload=tuple(workload),
        faults=tuple(faults),
        drops=drops,
        horizon=horizon,
        seed=seed,
    )


def failure_free_scenario(
    seed: int,
    *,
    n: int = 2,
    clients: int = 3,
    ops_per_client: int = 8,
    keys: int = 2,
    delta_client: int = 40_000,
    delta_network: int = 30_000,
) -> Scenario:
    """No drops, no faults, latencies well inside alpha, small drift with sync."""
    rng = random.Random(f"ff:{seed}")
    size = 2 * n + 1
    t = RANDOM_TIMING
    horizon = 1_000_000
    names = [f"k{i}" for i in range(keys)]
    specs, workload = [], []
    for c in range(clients):
        cid = f"c{c}"
        specs.append(ClientSpec(cid, rng.randrange(size), delta_client, delta_network, uniform(100, 1_500)))
        for k in range(ops_per_client):
            op = "write" if rng.random() < 0.4 else "read"
            workload.append(Op(rng.randint(0, horizon - 3 * t.delta), cid, op, rng.choice(names), f"{cid}-{k}" if op == "write" else None))
    workload.sort(key=lambda o: (o.at, o.client))
    return Scenario(
        n=n,
        timing=t,
        clocks=tuple(ClockSpec(rng.randint(-100, 100), rng.randint(-10, 10)) for _ in range(size)),
        latency=uniform(200, 1_800),
        sync_latency=uniform(100, 350),
        processing=tuple(rng.randint(0, 100) for _ in range(size)),
        clients=tuple(specs),
        workload=tuple(workload),
        horizon=horizon,
        seed=seed,
    )


def single_op_scenario(n: int = 2, latency: int = 1_000) -> Scenario:
    """One write then one read on a quiet circle with constant latency."""
    t = Timing(100_000, 5_000, 95_000, 10_000, 1_000, 0, 500, 0, 25_000)
    size = 2 * n + 1
    return Scenario(
        n=n,
        timing=t,
        clocks=(ClockSpec(),) * size,
        latency=constant(latency),
        clients=(ClientSpec("a", 0, 100_000, 20_000, constant(latency)), ClientSpec("b", size - 1, 100_000, 20_000, constant(latency))),
        workload=(Op(1_000, "a", "write", "x", "v1"), Op(50_000, "b", "read", "x")),
        horizon=400_000,
    )
