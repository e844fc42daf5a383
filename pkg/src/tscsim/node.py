"""Per-replica protocol state machine.

Every handler is a pure transition: it takes a :class:`NodeState` plus one
event and returns :class:`Effects` holding the successor state, outbound
messages, timers to arm (durations in local ticks) and client replies.  The
input state is never mutated, so replaying a handler yields identical output.

Node ``i``'s clockwise neighbour is ``i + 1`` and its counter-clockwise
neighbour ``i - 1`` (mod N).
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .antientropy import compare_trees, merge_version, merkle_from_digests, source_wins
from .protocol import (
    CommitTimestamp,
    QuorumConfig,
    TimingConfig,
    VersionedObject,
    WriteId,
    commit_timestamp,
    object_digest,
    valid_write_check,
)

ReadId = tuple[int, int]


class Status(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"


class Kind(str, enum.Enum):
    WRITE_REQUEST = "WriteRequest"
    WRITE_CONFIRM = "WriteConfirm"
    COMMIT_TS = "CommitTs"
    HASH_REQUEST = "HashRequest"
    HASH_REPLY = "HashReply"
    OBJECT_FETCH = "ObjectFetch"
    OBJECT_REPLY = "ObjectReply"
    AE_REQUEST = "AntiEntropyRequest"
    AE_OFFER = "AntiEntropyOffer"
    AE_PUSH = "AntiEntropyPush"
    SYNC_PROBE = "SyncProbe"

    def __str__(self) -> str:
        return self.value


WRITE_PATH = frozenset({Kind.WRITE_REQUEST, Kind.WRITE_CONFIRM, Kind.COMMIT_TS})
READ_PATH = frozenset({Kind.HASH_REQUEST, Kind.HASH_REPLY})


@dataclass(frozen=True)
class Message:
    kind: Kind
    sender: int
    receiver: int
    t_send: int  # sender's local clock when the message left
    write_id: WriteId | None = None
    read_id: ReadId | None = None
    object_id: str | None = None
    value: bytes | None = None
    stamp: int | None = None  # t_recv carried by a confirmation
    commit: CommitTimestamp | None = None
    digest: str | None = None
    target: int | None = None  # node to heal (anti-entropy mandate)
    leaves: tuple[tuple[str, str], ...] | None = None
    objects: tuple[VersionedObject, ...] | None = None


@dataclass(frozen=True)
class Timer:
    duration: int
    token: tuple


@dataclass(frozen=True)
class ClientReply:
    client: Any
    ok: bool
    value: bytes | None = None
    version: CommitTimestamp | None = None
    reason: str = ""


@dataclass(frozen=True)
class PendingWrite:
    write_id: WriteId
    object_id: str
    value: bytes
    t_recv: int
    beta_deadline: int
    expired: bool = False


@dataclass(frozen=True)
class WriteCoordination:
    write_id: WriteId
    object_id: str
    value: bytes
    t_send: int
    alpha_deadline: int
    confirmations: Mapping[int, int] = field(default_factory=dict)
    client: Any = None
    floor: int | None = None


@dataclass(frozen=True)
class ReadCoordination:
    read_id: ReadId
    object_id: str
    own_hash: str
    replies: Mapping[int, str] = field(default_factory=dict)
    client: Any = None
    answered: bool = False
    fetching: str | None = None  # majority digest being fetched (read case 2)


@dataclass(frozen=True)
class NodeConfig:
    quorum: QuorumConfig
    timing: TimingConfig
    guard: int = 8
    revalidation_retry: int = 0
    fetch_timeout: int = 0
    digest_size: int = 8
    beta_expiry_invalidates: bool = True  # False only in the mutation harness

    @property
    def local_beta(self) -> int:
        """Finalization window on not-triggering nodes, shortened by the drift guard."""
        return self.timing.beta - self.guard

    @property
    def barrier(self) -> int:
        return self.timing.delta + self.guard

    @property
    def retry(self) -> int:
        return self.revalidation_retry or max(1, self.timing.delta // 4)


@dataclass
class NodeState:
    index: int
    size: int
    status: Status = Status.VALID
    store: dict[str, VersionedObject] = field(default_factory=dict)
    history: dict[str, tuple[CommitTimestamp, ...]] = field(default_factory=dict)
    pending: dict[WriteId, PendingWrite] = field(default_factory=dict)
    coords: dict[WriteId, WriteCoordination] = field(default_factory=dict)
    reads: dict[ReadId, ReadCoordination] = field(default_factory=dict)
    barriers: frozenset[WriteId] = frozenset()
    stale_objects: frozenset[str] = frozenset()
    reval_active: bool = False
    seq: int = 0

    def fork(self) -> "NodeState":
        return replace(
            self,
            store=dict(self.store),
            history=dict(self.history),
            pending=dict(self.pending),
            coords=dict(self.coords),
            reads=dict(self.reads),
        )

    @property
    def ccw(self) -> int:
        return (self.index - 1) % self.size

    @property
    def cw(self) -> int:
        return (self.index + 1) % self.size

    def others(self) -> range:
        return range(self.size)

    def needs_repair(self) -> bool:
        return self.status is Status.INVALID or bool(self.stale_objects)

    def serves(self, object_id: str) -> bool:
        return self.status is Status.VALID and object_id not in self.stale_objects


@dataclass
class Effects:
    state: NodeState
    messages: list[Message] = field(default_factory=list)
    timers: list[Timer] = field(default_factory=list)
    replies: list[ClientReply] = field(default_factory=list)
    notes: list[tuple] = field(default_factory=list)

    def send(self, kind: Kind, receiver: int, now: int, **fields) -> None:
        self.messages.append(Message(kind, self.state.index, receiver, now, **fields))


def initial_state(index: int, size: int) -> NodeState:
    return NodeState(index, size)


# --- helpers ----------------------------------------------------------------


def _put(eff: Effects, obj: VersionedObject, tie=source_wins) -> bool:
    """Merge a finalized version into store and history; True if the store changed."""
    s = eff.state
    key = obj.object_id
    hist = s.history.get(key, ())
    if obj.commit_ts not in hist:
        i = bisect.bisect(hist, obj.commit_ts)
        s.history[key] = hist[:i] + (obj.commit_ts,) + hist[i:]
    cur = s.store.get(key)
    winner = merge_version(key, cur, obj, tie)
    if winner is cur:
        return False
    s.store[key] = winner
    eff.notes.append(("store", key))
    return True


def _invalidate(eff: Effects, cfg: NodeConfig, reason: str) -> None:
    s = eff.state
    if s.status is Status.VALID:
        s.status = Status.INVALID
        eff.notes.append(("invalidated", reason))
    _ensure_repair(eff, cfg)


def _ensure_repair(eff: Effects, cfg: NodeConfig) -> None:
    s = eff.state
    if s.reval_active or not s.needs_repair():
        return
    s.reval_active = True
    eff.timers.append(Timer(0, ("reval",)))


def _leaves(s: NodeState) -> tuple[tuple[str, str], ...]:
    return tuple((k, object_digest(v)) for k, v in sorted(s.store.items()))


# --- writes -----------------------------------------------------------------


def begin_write(
    state: NodeState,
    cfg: NodeConfig,
    object_id: str,
    value: bytes,
    now: int,
    client: Any = None,
    floor: int | None = None,
) -> Effects:
    if state.status is Status.INVALID:
        return Effects(state, replies=[ClientReply(client, False, reason="invalid node")])
    s = state.fork()
    s.seq += 1
    wid = (s.index, s.seq)
    eff = Effects(s)
    s.coords[wid] = WriteCoordination(wid, object_id, value, now, now + cfg.timing.alpha, {}, client, floor)
    for j in s.others():
        if j != s.index:
            eff.send(Kind.WRITE_REQUEST, j, now, write_id=wid, object_id=object_id, value=value)
    eff.timers.append(Timer(cfg.timing.alpha, ("alpha", wid)))
    eff.notes.append(("write_started", wid, object_id))
    return eff


def on_write_request(state: NodeState, cfg: NodeConfig, msg: Message, now: int) -> Effects:
    if state.status is Status.INVALID:
        return Effects(state)
    wid = msg.write_id
    known = state.pending.get(wid)
    if known is not None:
        eff = Effects(state)
        if not known.expired:
            eff.send(Kind.WRITE_CONFIRM, msg.sender, now, write_id=wid, stamp=known.t_recv)
        return eff
    s = state.fork()
    eff = Effects(s)
    s.barriers = s.barriers | {wid}
    eff.timers.append(Timer(cfg.barrier, ("barrier", wid)))
    if not valid_write_check(msg.t_send, now, cfg.timing.gamma, cfg.timing.alpha):
        s.stale_objects = s.stale_objects | {msg.object_id}
        eff.notes.append(("latency_reject", wid, msg.object_id))
        _ensure_repair(eff, cfg)
        return eff
    s.pending[wid] = PendingWrite(wid, msg.object_id, msg.value, now, now + cfg.local_beta)
    eff.timers.append(Timer(cfg.local_beta, ("beta", wid)))
    eff.send(Kind.WRITE_CONFIRM, msg.sender, now, write_id=wid, stamp=now)
    eff.notes.append(("accepted", wid))
    return eff


def on_write_confirm(state: NodeState, cfg: NodeConfig, msg: Message, now: int) -> Effects:
    coord = state.coords.get(msg.write_id)
    if coord is None or msg.sender in coord.confirmations:
        return Effects(state)  # decided already: late confirmations are ignored
    s = state.fork()
    eff = Effects(s)
    coord = replace(coord, confirmations={**coord.confirmations, msg.sender: msg.stamp})
    s.coords[coord.write_id] = coord
    eff.notes.append(("confirm", coord.write_id, msg.sender))
    if len(coord.confirmations) == cfg.quorum.n:
        eff.notes.append(("quorum", coord.write_id))
    if len(coord.confirmations) == s.size - 1:
        _decide(eff, cfg, coord, now)
    return eff


def on_alpha_expiry(state: NodeState, cfg: NodeConfig, write_id: WriteId, now: int) -> Effects:
    coord = state.coords.get(write_id)
    if coord is None:
        return Effects(state)
    eff = Effects(state.fork())
    _decide(eff, cfg, coord, now)
    return eff


def on_confirm_or_alpha_expiry(state: NodeState, cfg: NodeConfig, event: Message | WriteId, now: int) -> Effects:
    if isinstance(event, Message):
        return on_write_confirm(state, cfg, event, now)
    return on_alpha_expiry(state, cfg, event, now)


def _decide(eff: Effects, cfg: NodeConfig, coord: WriteCoordination, now: int) -> None:
    s = eff.state
    del s.coords[coord.write_id]
    wid = coord.write_id
    eff.timers.append(Timer(cfg.timing.beta, ("beta2", wid)))
    if len(coord.confirmations) < cfg.quorum.n:
        eff.replies.append(ClientReply(coord.client, False, reason="write quorum not reached"))
        eff.notes.append(("decided", wid, None))
        return
    commit = commit_timestamp(coord.t_send, coord.confirmations.values(), wid, coord.floor)
    for j in sorted(coord.confirmations):
        eff.send(Kind.COMMIT_TS, j, now, write_id=wid, commit=commit)
    _put(eff, VersionedObject(coord.object_id, coord.value, commit))
    eff.notes.append(("decided", wid, commit))
    eff.notes.append(("finalized", wid, commit))
    eff.replies.append(ClientReply(coord.client, True, coord.value, commit))


def on_commit_ts(state: NodeState, cfg: NodeConfig, msg: Message, now: int) -> Effects:
    pending = state.pending.get(msg.write_id)
    if pending is None or pending.expired:
        return Effects(state)
    s = state.fork()
    eff = Effects(s)
    del s.pending[msg.write_id]
    s.barriers = s.barriers - {msg.write_id}
    _put(eff, VersionedObject(pending.object_id, pending.value, msg.commit))
    eff.notes.append(("finalized", msg.write_id, msg.commit))
    return eff


def on_beta_expiry(state: NodeState, cfg: NodeConfig, write_id: WriteId, now: int) -> Effects:
    pending = state.pending.get(write_id)
    if pending is None or pending.expired:
        return Effects(state)
    s = state.fork()
    eff = Effects(s)
    s.pending[write_id] = replace(pending, expired=True)
    if cfg.beta_expiry_invalidates:
        _invalidate(eff, cfg, "beta expired")
    return eff


def on_barrier(state: NodeState, cfg: NodeConfig, write_id: WriteId, now: int) -> Effects:
    if write_id not in state.barriers:
        return Effects(state)
    s = state.fork()
    s.barriers = s.barriers - {write_id}
    return Effects(s)


# --- reads ------------------------------------------------------------------


@dataclass(frozen=True)
class ReadOutcome:
    case: str  # "pending" | "success" | "majority" | "failure"
    digest: str | None = None
    matched: tuple[int, ...] = ()
    mismatched: tuple[int, ...] = ()


def classify_read(own_hash: str, replies: Mapping[int, str], n: int, final: bool) -> ReadOutcome:
    """Quorum verdict on the hash replies collected so far.

    ``success``: at least ``n`` foreign replies equal the trigger's own hash.
    ``majority``: ``n + 1`` foreign replies agree on another hash.
    ``failure``: neither, and no more replies will be considered.
    """
    matched = tuple(j for j, h in replies.items() if h == own_hash)
    mismatched = tuple(j for j, h in replies.items() if h != own_hash)
    if len(matched) >= n:
        return ReadOutcome("success", own_hash, matched, mismatched)
    tally: dict[str, list[int]] = {}
    for j, h in replies.items():
        if h != own_hash:
            tally.setdefault(h, []).append(j)
    for h, nodes in tally.items():
        if len(nodes) >= n + 1:
            return ReadOutcome("majority", h, tuple(nodes), matched)
    return ReadOutcome("failure" if final else "pending", None, matched, mismatched)


def begin_read(state: NodeState, cfg: NodeConfig, object_id: str, now: int, client: Any = None) -> Effects:
    if not state.serves(object_id):
        return Effects(state, replies=[ClientReply(client, False, reason="invalid node")])
    s = state.fork()
    s.seq += 1
    rid = (s.index, s.seq)
    eff = Effects(s)
    own = object_digest(s.store.get(object_id), cfg.digest_size)
    s.reads[rid] = ReadCoordination(rid, object_id, own, {}, client)
    for j in s.others():
        if j != s.index:
            eff.send(Kind.HASH_REQUEST, j, now, read_id=rid, object_id=object_id)
    eff.timers.append(Timer(cfg.timing.omega, ("omega", rid)))
    eff.notes.append(("read_started", rid, object_id, own))
    return eff


def on_hash_request(state: NodeState, cfg: NodeConfig, msg: Message, now: int) -> Effects:
    eff = Effects(state)
    if state.serves(msg.object_id):
        h = object_digest(state.store.get(msg.object_id), cfg.digest_size)
        eff.send(Kind.HASH_REPLY, msg.sender, now, read_id=msg.read_id, object_id=msg.object_id, digest=h)
    return eff


def on_hash_reply(state: NodeState, cfg: NodeConfig, msg: Message, now: int) -> Effects:
    rc = state.reads.get(msg.read_id)
    if rc is None or rc.fetching or msg.sender in rc.replies:
        return Effects(state)
    s = state.fork()
    rc = replace(rc, replies={**rc.replies, msg.sender: msg.digest})
    s.reads[rc.read_id] = rc
    eff = Effects(s)
    _advance_read(eff, cfg, rc, now, final=len(rc.replies) == s.size - 1)
    return eff


def on_omega(state: NodeState, cfg: NodeConfig, read_id: ReadId, now: int) -> Effects:
    rc = state.reads.get(read_id)
    if rc is None or rc.fetching:
        return Effects(state)
    eff = Effects(state.fork())
    _advance_read(eff, cfg, rc, now, final=True)
    return eff


def resolve_read(state: NodeState, cfg: NodeConfig, read_id: ReadId, now: int) -> Effects:
    """Force the verdict for ``read_id`` as at its omega deadline."""
    return on_omega(state, cfg, read_id, now)


def _healer_for(s: NodeState, stale: int, good: set[int]) -> int:
    j = stale
    for _ in range(s.size):
        j = (j - 1) % s.size
        if j in good:
            return j
    return s.index


def _advance_read(eff: Effects, cfg: NodeConfig, rc: ReadCoordination, now: int, final: bool) -> None:
    s = eff.state
    out = classify_read(rc.own_hash, rc.replies, cfg.quorum.n, final)
    if not rc.answered:
        if out.case == "success":
            obj = s.store.get(rc.object_id)
            eff.replies.append(ClientReply(rc.client, True, obj.value if obj else None, obj.commit_ts if obj else None))
            eff.notes.append(("read_done", rc.read_id, "success", out.digest, (s.index,) + out.matched))
            rc = replace(rc, answered=True)
            s.reads[rc.read_id] = rc
        elif out.case == "majority":
            s.reads[rc.read_id] = replace(rc, answered=True, fetching=out.digest)
            eff.send(Kind.OBJECT_FETCH, out.matched[0], now, read_id=rc.read_id, object_id=rc.object_id)
            eff.timers.append(Timer(cfg.fetch_timeout or cfg.timing.omega, ("fetch", rc.read_id)))
            eff.notes.append(("read_majority", rc.read_id, out.digest, out.matched))
            _invalidate(eff, cfg, "read minority")
            return
        elif out.case == "failure":
            del s.reads[rc.read_id]
            eff.replies.append(ClientReply(rc.client, False, reason="no read quorum"))
            eff.notes.append(("read_done", rc.read_id, "failure", None, ()))
            return
    if rc.answered and final:
        del s.reads[rc.read_id]
        good = {s.index, *out.matched}
        for stale in out.mismatched:
            healer = _healer_for(s, stale, good)
            if healer == s.index:
                eff.send(Kind.AE_OFFER, stale, now, target=stale)
            else:
                eff.send(Kind.AE_REQUEST, healer, now, target=stale)
            eff.notes.append(("heal_mandate", rc.read_id, stale, healer))


def on_object_fetch(state: NodeState, cfg: NodeConfig, msg: Message, now: int) -> Effects:
    eff = Effects(state)
    if state.serves(msg.object_id):
        obj = state.store.get(msg.object_id)
        eff.send(Kind.OBJECT_REPLY, msg.sender, now, read_id=msg.read_id, object_id=msg.object_id,
                 objects=(obj,) if obj else ())
    return eff


def on_object_reply(state: NodeState, cfg: NodeConfig, msg: Message, now: int) -> Effects:
    rc = state.reads.get(msg.read_id)
    if rc is None or rc.fetching is None:
        return Effects(state)
    obj = msg.objects[0] if msg.objects else None
    if object_digest(obj, cfg.digest_size) != rc.fetching:
        return Effects(state)
    s = state.fork()
    del s.reads[rc.read_id]
    eff = Effects(s)
    eff.replies.append(ClientReply(rc.client, True, obj.value if obj else None, obj.commit_ts if obj else None))
    eff.notes.append(("read_done", rc.read_id, "majority", rc.fetching, ()))
    return eff


def on_fetch_timeout(state: NodeState, cfg: NodeConfig, read_id: ReadId, now: int) -> Effects:
    rc = state.reads.get(read_id)
    if rc is None:
        return Effects(state)
    s = state.fork()
    del s.reads[read_id]
    eff = Effects(s)
    eff.replies.append(ClientReply(rc.client, False, reason="majority fetch timed out"))
    eff.notes.append(("read_done", read_id, "failure", None, ()))
    return eff


# --- anti-entropy and revalidation -------------------------------------------


def request_revalidation(state: NodeState, cfg: NodeConfig, now: int) -> Effects:
    """Ask the ccw neighbour for an anti-entropy session; re-arms until healed."""
    if not state.needs_repair():
        if not state.reval_active:
            return Effects(state)
        s = state.fork()
        s.reval_active = False
        return Effects(s)
    eff = Effects(state)
    eff.send(Kind.AE_REQUEST, state.ccw, now, target=state.index, leaves=_leaves(state))
    eff.timers.append(Timer(cfg.retry, ("reval",)))
    return eff


def on_ae_request(state: NodeState, cfg: NodeConfig, msg: Message, now: int) -> Effects:
    if state.status is Status.INVALID:
        return Effects(state)
    eff = Effects(state)
    if msg.leaves is None:
        # healing mandate from a read trigger: invite the stale node to a session
        eff.send(Kind.AE_OFFER, msg.target, now, target=msg.target)
        return eff
    theirs = dict(msg.leaves)
    mine = {k: object_digest(v) for k, v in state.store.items() if k not in state.stale_objects}
    keys = set(theirs) | set(mine)
    diff, comparisons = compare_trees(merkle_from_digests(mine, keys), merkle_from_digests(theirs, keys))
    objects = tuple(state.store[k] for k in diff if k in mine)
    eff.send(Kind.AE_PUSH, msg.sender, now, target=msg.sender, objects=objects)
    eff.notes.append(("ae_served", msg.sender, comparisons, len(objects)))
    return eff


def on_ae_offer(state: NodeState, cfg: NodeConfig, msg: Message, now: int) -> Effects:
    eff = Effects(state)
    eff.send(Kind.AE_REQUEST, msg.sender, now, target=state.index, leaves=_leaves(state))
    return eff


def apply_objects(state: NodeState, objects, tie=source_wins) -> tuple[Effects, list[str], int]:
    """Merge transferred versions; matching pending writes count as finalized."""
    s = state.fork()
    eff = Effects(s)
    moved, size = [], 0
    for obj in objects:
        wid = obj.commit_ts.write_id
        if wid in s.pending:
            del s.pending[wid]
            s.barriers = s.barriers - {wid}
            eff.notes.append(("finalized", wid, obj.commit_ts))
        if _put(eff, obj, tie):
            moved.append(obj.object_id)
            size += len(obj.value)
    return eff, moved, size


def on_ae_push(state: NodeState, cfg: NodeConfig, msg: Message, now: int) -> Effects:
    eff, moved, size = apply_objects(state, msg.objects or ())
    s = eff.state
    eff.notes.append(("ae_applied", msg.sender, tuple(moved), size))
    if s.needs_repair() and not s.barriers:
        for wid, p in list(s.pending.items()):
            if p.expired:
                del s.pending[wid]
        was_invalid = s.status is Status.INVALID
        s.status = Status.VALID
        s.stale_objects = frozenset()
        s.reval_active = False
        eff.notes.append(("revalidated", msg.sender, was_invalid))
    return eff


# --- faults -------------------------------------------------------------------


def crash(state: NodeState, cfg: NodeConfig) -> Effects:
    """The node halts: in-memory coordination is lost, the disk survives."""
    s = state.fork()
    s.coords.clear()
    s.reads.clear()
    s.reval_active = False
    eff = Effects(s)
    if s.status is Status.VALID:
        s.status = Status.INVALID
        eff.notes.append(("invalidated", "crash"))
    return eff


def restart(state: NodeState, cfg: NodeConfig, now: int) -> Effects:
    s = state.fork()
    eff = Effects(s)
    for wid, p in s.pending.items():
        s.pending[wid] = replace(p, expired=True)
    for wid in sorted(s.barriers):
        eff.timers.append(Timer(cfg.barrier, ("barrier", wid)))
    _ensure_repair(eff, cfg)
    return eff


def corrupt(state: NodeState, object_id: str, byte: int) -> Effects:
    obj = state.store.get(object_id)
    if obj is None:
        return Effects(state)
    s = state.fork()
    raw = bytearray(obj.value or b"\x00")
    raw[byte % len(raw)] ^= 0xFF
    s.store[object_id] = replace(obj, value=bytes(raw))
    return Effects(s, notes=[("store", object_id), ("corrupted", object_id)])


# --- dispatch -------------------------------------------------------------------

_MESSAGE_HANDLERS = {
    Kind.WRITE_REQUEST: on_write_request,
    Kind.WRITE_CONFIRM: on_write_confirm,
    Kind.COMMIT_TS: on_commit_ts,
    Kind.HASH_REQUEST: on_hash_request,
    Kind.HASH_REPLY: on_hash_reply,
    Kind.OBJECT_FETCH: on_object_fetch,
    Kind.OBJECT_REPLY: on_object_reply,
    Kind.AE_REQUEST: on_ae_request,
    Kind.AE_OFFER: on_ae_offer,
    Kind.AE_PUSH: on_ae_push,
}


def on_message(state: NodeState, cfg: NodeConfig, msg: Message, now: int) -> Effects:
    return _MESSAGE_HANDLERS[msg.kind](state, cfg, msg, now)


def on_timer(state: NodeState, cfg: NodeConfig, token: tuple, now: int) -> Effects:
    name = token[0]
    if name == "alpha":
        return on_alpha_expiry(state, cfg, token[1], now)
    if name == "beta":
        return on_beta_expiry(state, cfg, token[1], now)
    if name == "beta2":
        return Effects(state, notes=[("beta2_closed", token[1])])
    if name == "barrier":
        return on_barrier(state, cfg, token[1], now)
    if name == "omega":
        return on_omega(state, cfg, token[1], now)
    if name == "fetch":
        return on_fetch_timeout(state, cfg, token[1], now)
    if name == "reval":
        return request_revalidation(state, cfg, now)
    raise ValueError(f"unknown timer {token!r}")
