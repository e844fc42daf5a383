"""Seeded discrete-event engine driving nodes, clients, clocks and faults.

Time here is the hidden global oracle time ``g``; nodes only ever see their
own local clock readings. Every random draw comes from one ``random.Random``
seeded per run, and simultaneous events run in scheduling order, so a
``(scenario, seed)`` pair fully determines the trace.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from .. import node as nd
from ..antientropy import CircleState, convergence_step, majority_tie
from ..client_cache import (
    ClientTiming,
    Hit,
    NewValue,
    TEMPORARILY_INVALID,
    cache_read,
    mark_old,
    revalidate,
    timed_read,
)
from ..protocol import CommitTimestamp, object_digest, quorum_config
from ..timebase import PhysicalClock, cristian_sync, drift_guard, global_after, local_time
from .faults import Corrupt, Crash, link_up
from .latency import Network

if TYPE_CHECKING:
    from ..scenario import ClientSpec, Scenario

TRACE_HEADER = "# tscsim trace v1"


@dataclass(frozen=True)
class Delivered:
    at: int


@dataclass(frozen=True)
class Dropped:
    reason: str


def deliver(msg: nd.Message, network: Network, faults, g: int, rng: random.Random) -> Delivered | Dropped:
    """Decide the fate of ``msg`` sent at ``g``: dropped if its link is down now."""
    if not link_up(faults, msg.sender, msg.receiver, g):
        return Dropped("link down")
    return Delivered(g + network.transit(msg.sender, msg.receiver, rng))


# --- what the run records for the audit ------------------------------------------


@dataclass
class WriteRecord:
    write_id: tuple[int, int]
    trigger: int
    object_id: str
    client: str | None
    started: int
    start_deadline: int  # fallback close if the trigger never decides
    decided: int | None = None
    commit: CommitTimestamp | None = None
    close: int | None = None  # trigger's second beta window close
    quorum_at: int | None = None
    accepted: dict[int, int] = field(default_factory=dict)


@dataclass
class ReadRecord:
    read_id: tuple[int, int]
    trigger: int
    object_id: str
    started: int
    done: int | None = None
    case: str | None = None
    digest: str | None = None


@dataclass
class Observation:
    client: str
    at: int
    object_id: str
    value: bytes | None
    version: CommitTimestamp | None
    source: str  # "cache" | "read"


@dataclass
class ClientOutcome:
    client: str
    op: str
    object_id: str
    issued: int
    finished: int
    result: str  # "ok" | "rejected" | "timeout" | "hit"
    version: CommitTimestamp | None = None


@dataclass
class RunRecord:
    size: int
    n: int
    horizon: int
    end: int = 0
    writes: dict = field(default_factory=dict)
    reads: dict = field(default_factory=dict)
    finalized: list = field(default_factory=list)  # (g, node, write_id, commit)
    status: list = field(default_factory=list)  # per node: [(g, valid)]
    digests: dict = field(default_factory=dict)  # (node, key) -> [(g, digest)]
    observations: list = field(default_factory=list)
    outcomes: list = field(default_factory=list)
    invalidations: list = field(default_factory=list)  # (g, node, reason)
    revalidations: int = 0
    final_history: list = field(default_factory=list)
    final_store: list = field(default_factory=list)
    final_valid: list = field(default_factory=list)
    max_clock_deviation: int = 0
    ae_comparisons: int = 0
    ae_objects: int = 0
    ae_bytes: int = 0
    sweep_transfers: int = 0


@dataclass
class _Client:
    spec: ClientSpec
    timing: ClientTiming
    cache: dict = field(default_factory=dict)
    queue: deque = field(default_factory=deque)
    busy: Any = None
    op_no: int = 0
    sent_at: int = 0
    floor: int | None = None


class Simulation:
    def __init__(
        self,
        scenario: Scenario,
        seed: int | None = None,
        *,
        beta_expiry_invalidates: bool = True,
        keep_trace: bool = True,
    ):
        sc = scenario
        self.sc = sc
        self.seed = sc.seed if seed is None else seed
        self.rng = random.Random(self.seed)
        self.size = sc.size
        t = sc.timing
        self.cfg = nd.NodeConfig(
            quorum=quorum_config(sc.n),
            timing=t.protocol(),
            guard=drift_guard(sc.max_drift_ppm, t.delta),
            revalidation_retry=t.revalidation_retry,
            fetch_timeout=t.omega,
            beta_expiry_invalidates=beta_expiry_invalidates,
        )
        self.nodes = [nd.initial_state(i, self.size) for i in range(self.size)]
        self.clocks = [PhysicalClock(c.offset, c.drift_ppm) for c in sc.clocks]
        self.network = Network(sc.latency, {(a, b): m for a, b, m in sc.links}, sc.processing)
        self.sync_latency = sc.sync_latency or sc.latency
        self.faults = sc.faults
        self.drops = dict(sc.drops)
        self.down = [False] * self.size
        self.epoch = [0] * self.size
        self.clients = {
            c.id: _Client(c, ClientTiming(c.delta_client, c.delta_network, t.delta)) for c in sc.clients
        }
        self.heap: list = []
        self.seq = 0
        self.mid = 0
        self.now = 0
        self.keep_trace = keep_trace
        self.trace: list[str] = [TRACE_HEADER] if keep_trace else []
        self.counts: dict[str, int] = {}
        self.dropped: dict[str, int] = {}
        self.rec = RunRecord(self.size, sc.n, sc.horizon)
        self.rec.status = [[(0, True)] for _ in range(self.size)]
        self.last_activity = 0
        self.circle = CircleState([{} for _ in range(self.size)], [True] * self.size)
        self.sweep_paused = False
        self.round_transfers = 0
        self.round_steps = 0

        for op in sc.workload:
            self._push(op.at, "op", op)
        for f in sc.faults:
            if isinstance(f, Crash):
                self._push(f.start, "crash", f.node)
                if f.end is not None:
                    self._push(f.end, "restart", f.node)
            elif isinstance(f, Corrupt):
                self._push(f.at, "corrupt", f)
        if t.sync_interval:
            self._push(0, "sync", None)
        if t.idle_ticks:
            self._push(t.delta, "sweep", None)

    # --- plumbing -----------------------------------------------------------------

    def _push(self, at: int, kind: str, payload: Any) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (at, self.seq, kind, payload))

    def _line(self, action: str, mid: int, kind: str, sender, receiver, wid=None, obj=None, stamps: str = "") -> None:
        if self.keep_trace:
            w = "-" if wid is None else f"{wid[0]}.{wid[1]}"
            self.trace.append(f"{self.now}\t{action}\t{mid}\t{kind}\t{sender}\t{receiver}\t{w}\t{obj or '-'}\t{stamps or '-'}")

    def _count(self, kind: str) -> None:
        self.counts[kind] = self.counts.get(kind, 0) + 1

    def local(self, i: int) -> int:
        return local_time(self.clocks[i], self.now)

    # --- main loop --------------------------------------------------------------

    def run(self) -> "Simulation":
        horizon = self.sc.horizon
        handlers = {
            "deliver": self._on_deliver,
            "timer": self._on_timer,
            "op": self._on_op,
            "client_req": self._on_client_req,
            "client_reply": self._on_client_reply,
            "client_deadline": self._on_client_deadline,
            "crash": self._on_crash,
            "restart": self._on_restart,
            "corrupt": self._on_corrupt,
            "sync": self._on_sync,
            "sweep": self._on_sweep,
        }
        heap = self.heap
        while heap and heap[0][0] <= horizon:
            at, _, kind, payload = heapq.heappop(heap)
            self.now = at
            handlers[kind](payload)
        self.now = horizon
        self._finish()
        return self

    def _apply(self, i: int, eff: nd.Effects) -> None:
        state = eff.state
        self.nodes[i] = state
        for msg in eff.messages:
            self._send(msg)
        for tm in eff.timers:
            self._push(global_after(self.clocks[i], self.now, tm.duration), "timer", (i, self.epoch[i], tm.token))
        for reply in eff.replies:
            self._reply(i, reply)
        rec = self.rec
        for note in eff.notes:
            tag = note[0]
            if tag == "store":
                key = note[1]
                rec.digests.setdefault((i, key), [(0, object_digest(None))]).append(
                    (self.now, object_digest(state.store.get(key)))
                )
            elif tag == "finalized":
                rec.finalized.append((self.now, i, note[1], note[2]))
            elif tag == "accepted":
                w = rec.writes.get(note[1])
                if w is not None:
                    w.accepted[i] = self.now
            elif tag == "quorum":
                rec.writes[note[1]].quorum_at = self.now
            elif tag == "decided":
                w = rec.writes[note[1]]
                w.decided = self.now
                w.commit = note[2]
                w.close = global_after(self.clocks[i], self.now, self.cfg.timing.beta)
            elif tag == "read_started":
                rec.reads[note[1]] = ReadRecord(note[1], i, note[2], self.now)
            elif tag == "read_done":
                r = rec.reads[note[1]]
                r.done, r.case, r.digest = self.now, note[2], note[3]
            elif tag == "invalidated":
                rec.invalidations.append((self.now, i, note[1]))
            elif tag == "revalidated":
                rec.revalidations += 1
            elif tag == "ae_served":
                rec.ae_comparisons += note[2]
            elif tag == "ae_applied":
                rec.ae_objects += len(note[2])
                rec.ae_bytes += note[3]
        valid = state.status is nd.Status.VALID and not self.down[i]
        if rec.status[i][-1][1] != valid:
            rec.status[i].append((self.now, valid))

    def _send(self, msg: nd.Message) -> None:
        kind = msg.kind.value
        self._count(kind)
        self.mid += 1
        mid = self.mid
        stamps = _stamps(msg)
        self._line("send", mid, kind, msg.sender, msg.receiver, msg.write_id, msg.object_id, stamps)
        p = self.drops.get(kind, 0.0)
        fate = Dropped("random") if p and self.rng.random() < p else deliver(msg, self.network, self.faults, self.now, self.rng)
        if isinstance(fate, Dropped):
            self.dropped[kind] = self.dropped.get(kind, 0) + 1
            self._line("drop", mid, kind, msg.sender, msg.receiver, msg.write_id, msg.object_id, fate.reason)
            return
        self._push(fate.at, "deliver", (mid, msg))

    def _on_deliver(self, payload) -> None:
        mid, msg = payload
        j = msg.receiver
        kind = msg.kind.value
        if self.down[j]:
            self.dropped[kind] = self.dropped.get(kind, 0) + 1
            self._line("drop", mid, kind, msg.sender, j, msg.write_id, msg.object_id, "receiver down")
            return
        self._line("deliver", mid, kind, msg.sender, j, msg.write_id, msg.object_id, _stamps(msg))
        self.last_activity = self.now
        self.sweep_paused = False
        self._apply(j, nd.on_message(self.nodes[j], self.cfg, msg, self.local(j)))

    def _on_timer(self, payload) -> None:
        i, epoch, token = payload
        if self.down[i] or epoch != self.epoch[i]:
            return
        self._apply(i, nd.on_timer(self.nodes[i], self.cfg, token, self.local(i)))

    # --- clients ----------------------------------------------------------------

    def _route(self, home: int) -> int:
        for k in range(self.size):
            j = (home + k) % self.size
            if not self.down[j]:
                return j
        return home

    def _on_op(self, op) -> None:
        c = self.clients[op.client]
        c.queue.append(op)
        if c.busy is None:
            self._start_next(c)

    def _start_next(self, c: _Client) -> None:
        while c.queue:
            op = c.queue.popleft()
            self.last_activity = self.now
            self.sweep_paused = False
            if op.op == "read":
                hit = cache_read(c.cache, op.key, self.now)
                if isinstance(hit, Hit):
                    e = hit.entry
                    assert self.now < e.ending_time, "cache served an expired entry"
                    self.rec.observations.append(Observation(c.spec.id, self.now, op.key, e.value, e.version, "cache"))
                    self.rec.outcomes.append(ClientOutcome(c.spec.id, "read", op.key, self.now, self.now, "hit", e.version))
                    continue
                timeout = c.timing.delta_network
            else:
                timeout = self.cfg.timing.delta + c.timing.delta_network
            c.op_no += 1
            c.busy = op
            c.sent_at = self.now
            target = self._route(c.spec.home)
            self.mid += 1
            kind = "ClientRead" if op.op == "read" else "ClientWrite"
            self._count(kind)
            self._line("send", self.mid, kind, f"c:{c.spec.id}", target, None, op.key)
            self._push(self.now + c.spec.latency.sample(self.rng), "client_req", (self.mid, target, c.spec.id, c.op_no, op))
            self._push(self.now + timeout, "client_deadline", (c.spec.id, c.op_no))
            return

    def _on_client_req(self, payload) -> None:
        mid, j, cid, op_no, op = payload
        kind = "ClientRead" if op.op == "read" else "ClientWrite"
        if self.down[j]:
            self._line("drop", mid, kind, f"c:{cid}", j, None, op.key, "receiver down")
            return
        self._line("deliver", mid, kind, f"c:{cid}", j, None, op.key)
        ref = (cid, op_no)
        now_l = self.local(j)
        if op.op == "write":
            c = self.clients[cid]
            eff = nd.begin_write(self.nodes[j], self.cfg, op.key, op.value.encode(), now_l, ref, c.floor)
            for note in eff.notes:
                if note[0] == "write_started":
                    wid = note[1]
                    t = self.cfg.timing
                    self.rec.writes[wid] = WriteRecord(
                        wid, j, op.key, cid, self.now, global_after(self.clocks[j], self.now, t.alpha + t.beta)
                    )
        else:
            eff = nd.begin_read(self.nodes[j], self.cfg, op.key, now_l, ref)
        self._apply(j, eff)

    def _reply(self, i: int, reply: nd.ClientReply) -> None:
        if reply.client is None:
            return
        cid, op_no = reply.client
        c = self.clients[cid]
        self.mid += 1
        self._count("ClientReply")
        self._line("send", self.mid, "ClientReply", i, f"c:{cid}", None, None, "ok" if reply.ok else "rejected")
        self._push(self.now + c.spec.latency.sample(self.rng), "client_reply", (self.mid, i, cid, op_no, reply))

    def _on_client_reply(self, payload) -> None:
        mid, i, cid, op_no, reply = payload
        c = self.clients[cid]
        self._line("deliver", mid, "ClientReply", i, f"c:{cid}", None, None, "ok" if reply.ok else "rejected")
        if c.busy is None or op_no != c.op_no:
            return  # the deadline already fired
        op = c.busy
        if op.op == "read":
            if reply.ok:
                c.cache, got = timed_read(
                    c.cache, op.key, c.sent_at, self.now, reply.value, reply.version, c.timing
                )
                assert got is not TEMPORARILY_INVALID
                kept = c.cache[op.key]
                self.rec.observations.append(Observation(cid, self.now, op.key, got, kept.version, "read"))
        elif reply.ok:
            c.cache = revalidate(c.cache, op.key, self.now, NewValue(reply.value, reply.version), c.timing.delta_client)
            c.floor = reply.version.value
        self.rec.outcomes.append(
            ClientOutcome(cid, op.op, op.key, c.sent_at, self.now, "ok" if reply.ok else "rejected", reply.version)
        )
        c.busy = None
        self._start_next(c)

    def _on_client_deadline(self, payload) -> None:
        cid, op_no = payload
        c = self.clients[cid]
        if c.busy is None or op_no != c.op_no:
            return
        op = c.busy
        c.cache = mark_old(c.cache)
        self.rec.outcomes.append(ClientOutcome(cid, op.op, op.key, c.sent_at, self.now, "timeout"))
        c.busy = None
        self._start_next(c)

    # --- faults, clocks, convergence -----------------------------------------------

    def _on_crash(self, i: int) -> None:
        self.epoch[i] += 1
        eff = nd.crash(self.nodes[i], self.cfg)
        self.down[i] = True
        self._apply(i, eff)

    def _on_restart(self, i: int) -> None:
        self.epoch[i] += 1
        self.down[i] = False
        self._apply(i, nd.restart(self.nodes[i], self.cfg, self.local(i)))

    def _on_corrupt(self, f: Corrupt) -> None:
        self._apply(f.node, nd.corrupt(self.nodes[f.node], f.object_id, f.byte))

    def _on_sync(self, _) -> None:
        """Every node runs one Cristian exchange against node 0."""
        t = self.sc.timing
        ref = 0
        self._track_deviation()
        for i in range(self.size):
            if i == ref or self.down[i] or self.down[ref]:
                continue
            out = self.sync_latency.sample(self.rng)
            back = self.sync_latency.sample(self.rng)
            for a, b, lat in ((i, ref, out), (ref, i, back)):
                self._count(nd.Kind.SYNC_PROBE.value)
                self.mid += 1
                self._line("send", self.mid, "SyncProbe", a, b)
                if not link_up(self.faults, a, b, self.now):
                    self._line("drop", self.mid, "SyncProbe", a, b, stamps="link down")
                    break
                self._line("deliver", self.mid, "SyncProbe", a, b, stamps=f"latency={lat}")
            else:
                if out + back <= t.sync_max_rtt:
                    self.clocks[i] = cristian_sync(self.clocks[i], self.clocks[ref], out + back, self.now, back)
        self._track_deviation()
        self._push(self.now + t.sync_interval, "sync", None)

    def _track_deviation(self) -> None:
        ref = local_time(self.clocks[0], self.now)
        dev = max(abs(local_time(c, self.now) - ref) for c in self.clocks)
        self.rec.max_clock_deviation = max(self.rec.max_clock_deviation, dev)

    def _on_sweep(self, _) -> None:
        t = self.sc.timing
        self._push(self.now + t.delta, "sweep", None)
        idle = self.now - self.last_activity >= t.idle_ticks
        if not idle:
            self.round_transfers = self.round_steps = 0
            return
        if self.sweep_paused:
            return
        circle = self.circle
        circle.stores = [dict(s.store) for s in self.nodes]
        circle.valid = [s.status is nd.Status.VALID and not self.down[i] for i, s in enumerate(self.nodes)]
        tie = majority_tie(circle)
        circle, step = convergence_step(circle, True)
        self.circle = circle
        self.round_steps += 1
        if step.result is not None:
            self.rec.ae_comparisons += step.result.comparisons
            if step.transferred:
                dst = step.target
                objects = [circle.stores[dst][k] for k in step.transferred]
                eff, moved, size = nd.apply_objects(self.nodes[dst], objects, tie)
                self._apply(dst, eff)
                self.mid += 1
                self._count(nd.Kind.AE_PUSH.value)
                self._line("send", self.mid, "AntiEntropyPush", step.source, dst, stamps=f"sweep={len(moved)}")
                self._line("deliver", self.mid, "AntiEntropyPush", step.source, dst, stamps=f"sweep={len(moved)}")
                self.rec.sweep_transfers += len(moved)
                self.rec.ae_bytes += size
                self.round_transfers += len(moved)
        if self.round_steps >= self.size:
            if self.round_transfers == 0:
                self.sweep_paused = True
            self.round_steps = self.round_transfers = 0

    def _finish(self) -> None:
        rec = self.rec
        rec.end = self.now
        self._track_deviation()
        rec.final_history = [dict(s.history) for s in self.nodes]
        rec.final_store = [dict(s.store) for s in self.nodes]
        rec.final_valid = [s.status is nd.Status.VALID and not self.down[i] for i, s in enumerate(self.nodes)]

    def trace_digest(self) -> str:
        h = hashlib.sha256()
        for line in self.trace:
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()


def _stamps(msg: nd.Message) -> str:
    parts = [f"t_send={msg.t_send}"]
    if msg.stamp is not None:
        parts.append(f"t_recv={msg.stamp}")
    if msg.commit is not None:
        parts.append(f"commit={msg.commit.value}")
    if msg.digest is not None:
        parts.append(f"hash={msg.digest}")
    return ";".join(parts)
