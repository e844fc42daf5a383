import copy
import itertools
from collections import deque

import pytest
from hypothesis import given, strategies as st

from tscsim.node import (
    Kind,
    Message,
    NodeConfig,
    Status,
    Timer,
    begin_read,
    begin_write,
    classify_read,
    crash,
    corrupt,
    initial_state,
    on_ae_push,
    on_beta_expiry,
    on_commit_ts,
    on_message,
    on_timer,
    restart,
)
from tscsim.protocol import CommitTimestamp, TimingConfig, VersionedObject, object_digest, quorum_config

TIMING = TimingConfig(delta=1000, alpha=50, beta=950, omega=100, gamma=5)


def config(n=1, **kw):
    return NodeConfig(quorum_config(n), TIMING, **kw)


def circle(n=1):
    cfg = config(n)
    return cfg, [initial_state(i, cfg.quorum.N) for i in range(cfg.quorum.N)]


def pump(states, cfg, first, now, skip=lambda m: False):
    """Deliver messages instantly, all clocks equal to ``now``. Returns every effect produced."""
    queue = deque(first.messages)
    states[first.state.index] = first.state
    effects = [first]
    while queue:
        msg = queue.popleft()
        if skip(msg):
            continue
        eff = on_message(states[msg.receiver], cfg, msg, now)
        states[msg.receiver] = eff.state
        effects.append(eff)
        queue.extend(eff.messages)
    return effects


def kinds(effects):
    return [m.kind for e in effects for m in e.messages]


def test_failure_free_write_uses_three_rounds():
    cfg, states = circle(1)
    effs = pump(states, cfg, begin_write(states[0], cfg, "x", b"v", 100, client="c"), 100)
    ks = kinds(effs)
    assert ks.count(Kind.WRITE_REQUEST) == ks.count(Kind.WRITE_CONFIRM) == ks.count(Kind.COMMIT_TS) == 2
    reply = next(r for e in effs for r in e.replies)
    assert reply.ok and reply.version == CommitTimestamp(101, (0, 1))
    assert all(s.store["x"].value == b"v" for s in states)
    assert all(not s.pending for s in states)


def test_read_success_uses_two_rounds_per_peer():
    cfg, states = circle(2)
    pump(states, cfg, begin_write(states[0], cfg, "x", b"v", 10), 10)
    effs = pump(states, cfg, begin_read(states[3], cfg, "x", 20, client="r"), 20)
    assert kinds(effs) == [Kind.HASH_REQUEST] * 4 + [Kind.HASH_REPLY] * 4
    reply = next(r for e in effs for r in e.replies)
    assert reply.ok and reply.value == b"v"


def test_write_fails_without_quorum_at_alpha():
    cfg, states = circle(1)
    eff = begin_write(states[0], cfg, "x", b"v", 0, client="c")
    assert Timer(50, ("alpha", (0, 1))) in eff.timers
    out = on_timer(eff.state, cfg, ("alpha", (0, 1)), 50)
    assert [r.ok for r in out.replies] == [False]
    assert not out.messages and "x" not in out.state.store
    assert any(t.token[0] == "beta2" for t in out.timers)


def test_commit_over_quorum_subset():
    cfg, states = circle(1)
    eff = begin_write(states[0], cfg, "x", b"v", 100)
    confirm = Message(Kind.WRITE_CONFIRM, 1, 0, 103, write_id=(0, 1), stamp=103)
    eff = on_message(eff.state, cfg, confirm, 104)
    eff = on_timer(eff.state, cfg, ("alpha", (0, 1)), 150)
    assert [m.receiver for m in eff.messages] == [1]
    assert eff.messages[0].commit.value == 104


def test_latency_reject_marks_object_stale():
    cfg, states = circle(1)
    late = Message(Kind.WRITE_REQUEST, 0, 1, 0, write_id=(0, 1), object_id="x", value=b"v")
    eff = on_message(states[1], cfg, late, 60)
    assert not eff.messages
    s = eff.state
    assert s.status is Status.VALID and s.stale_objects == {"x"} and (0, 1) in s.barriers
    assert Timer(0, ("reval",)) in eff.timers
    assert not s.serves("x") and s.serves("y")
    read = begin_read(s, cfg, "x", 61, client="c")
    assert not read.replies[0].ok


def test_duplicate_request_reconfirms_without_new_state():
    cfg, states = circle(1)
    req = Message(Kind.WRITE_REQUEST, 0, 1, 0, write_id=(0, 1), object_id="x", value=b"v")
    first = on_message(states[1], cfg, req, 3)
    again = on_message(first.state, cfg, req, 9)
    assert again.state is first.state
    assert again.messages[0].stamp == 3


@pytest.mark.parametrize("invalidates", [True, False])
def test_beta_expiry(invalidates):
    cfg = config(1, beta_expiry_invalidates=invalidates)
    s = initial_state(1, 3)
    req = Message(Kind.WRITE_REQUEST, 0, 1, 0, write_id=(0, 1), object_id="x", value=b"v")
    eff = on_message(s, cfg, req, 2)
    assert Timer(cfg.local_beta, ("beta", (0, 1))) in eff.timers
    expired = on_beta_expiry(eff.state, cfg, (0, 1), 2 + cfg.local_beta)
    assert (expired.state.status is Status.INVALID) == invalidates
    late = on_commit_ts(expired.state, cfg, Message(Kind.COMMIT_TS, 0, 1, 900, write_id=(0, 1),
                                                    commit=CommitTimestamp(3, (0, 1))), 1000)
    assert "x" not in late.state.store


def test_revalidation_waits_for_barriers():
    cfg = config(1)
    s = initial_state(1, 3)
    req = Message(Kind.WRITE_REQUEST, 0, 1, 0, write_id=(0, 1), object_id="x", value=b"v")
    s = on_message(s, cfg, req, 2).state
    s = on_beta_expiry(s, cfg, (0, 1), 950).state
    push = Message(Kind.AE_PUSH, 0, 1, 951, target=1, objects=())
    assert on_ae_push(s, cfg, push, 951).state.status is Status.INVALID
    s = on_timer(s, cfg, ("barrier", (0, 1)), 1010).state
    healed = on_ae_push(s, cfg, push, 1011).state
    assert healed.status is Status.VALID and not healed.pending


def test_revalidation_asks_ccw_neighbour_and_retries():
    cfg = config(1)
    s = crash(initial_state(0, 3), cfg).state
    eff = restart(s, cfg, 10)
    assert Timer(0, ("reval",)) in eff.timers
    ask = on_timer(eff.state, cfg, ("reval",), 10)
    assert [(m.kind, m.receiver) for m in ask.messages] == [(Kind.AE_REQUEST, 2)]
    assert Timer(cfg.retry, ("reval",)) in ask.timers


def test_invalid_node_is_silent():
    cfg = config(1)
    s = crash(initial_state(1, 3), cfg).state
    assert begin_write(s, cfg, "x", b"v", 0, client="c").replies[0].ok is False
    for kind in (Kind.WRITE_REQUEST, Kind.HASH_REQUEST, Kind.OBJECT_FETCH):
        msg = Message(kind, 0, 1, 0, write_id=(0, 1), read_id=(0, 1), object_id="x", value=b"v")
        assert on_message(s, cfg, msg, 1).messages == []


def test_majority_read_fetches_and_self_invalidates():
    cfg, states = circle(1)
    good = VersionedObject("x", b"new", CommitTimestamp(5, (1, 1)))
    for i in (1, 2):
        states[i].store["x"] = good
    effs = pump(states, cfg, begin_read(states[0], cfg, "x", 0, client="c"), 0)
    reply = next(r for e in effs for r in e.replies)
    assert reply.ok and reply.value == b"new"
    assert Kind.OBJECT_FETCH in kinds(effs)
    assert states[0].status is Status.INVALID


def test_minority_node_gets_a_heal_mandate():
    cfg, states = circle(1)
    obj = VersionedObject("x", b"v", CommitTimestamp(5, (0, 1)))
    states[0].store["x"] = obj
    states[1].store["x"] = obj
    states[2] = corrupt(states[2], "x", 0).state
    assert states[2].store == {}  # nothing to corrupt
    states[2].store["x"] = VersionedObject("x", b"w", CommitTimestamp(1, (0, 0)))
    effs = pump(states, cfg, begin_read(states[0], cfg, "x", 0, client="c"), 0)
    ks = kinds(effs)
    assert ks[-4:] == [Kind.AE_REQUEST, Kind.AE_OFFER, Kind.AE_REQUEST, Kind.AE_PUSH]
    assert states[2].store["x"] == obj


def brute_classify(own, replies, n, final):
    """Oracle: enumerate candidate digests and count supporters directly."""
    if sum(h == own for h in replies.values()) >= n:
        return "success"
    for h in set(replies.values()) - {own}:
        if sum(x == h for x in replies.values()) >= n + 1:
            return "majority"
    return "failure" if final else "pending"


@given(st.integers(1, 3), st.data())
def test_classify_read_matches_oracle(n, data):
    peers = 2 * n
    got = data.draw(st.lists(st.integers(0, peers - 1), unique=True, max_size=peers))
    replies = {j: data.draw(st.sampled_from("abc")) for j in got}
    own = data.draw(st.sampled_from("abc"))
    final = data.draw(st.booleans())
    assert classify_read(own, replies, n, final).case == brute_classify(own, replies, n, final)


def test_classify_read_exhaustive_small():
    for replies in itertools.product("ab", repeat=4):
        r = dict(enumerate(replies))
        assert classify_read("a", r, 2, True).case == brute_classify("a", r, 2, True)


def _events(cfg):
    w = (0, 1)
    return [
        ("msg", Message(Kind.WRITE_REQUEST, 0, 1, 0, write_id=w, object_id="x", value=b"v")),
        ("msg", Message(Kind.WRITE_CONFIRM, 2, 1, 0, write_id=(1, 1), stamp=3)),
        ("msg", Message(Kind.COMMIT_TS, 0, 1, 5, write_id=w, commit=CommitTimestamp(9, w))),
        ("msg", Message(Kind.HASH_REQUEST, 0, 1, 5, read_id=(0, 1), object_id="x")),
        ("msg", Message(Kind.HASH_REPLY, 2, 1, 5, read_id=(1, 2), object_id="x", digest="zz")),
        ("msg", Message(Kind.AE_REQUEST, 2, 1, 5, target=2, leaves=())),
        ("msg", Message(Kind.AE_PUSH, 0, 1, 5, target=1, objects=(VersionedObject("y", b"q", CommitTimestamp(2, (0, 9))),))),
        ("timer", ("alpha", (1, 1))),
        ("timer", ("beta", w)),
        ("timer", ("barrier", w)),
        ("timer", ("omega", (1, 2))),
        ("timer", ("reval",)),
        ("write", "x"),
        ("read", "x"),
    ]


@given(st.lists(st.integers(0, 13), max_size=12))
def test_handlers_are_pure_and_deterministic(script):
    cfg = config(1)
    s = initial_state(1, 3)
    table = _events(cfg)
    for i in script:
        kind, ev = table[i]
        before = copy.deepcopy(s)

        def step():
            if kind == "msg":
                return on_message(s, cfg, ev, 10 * i)
            if kind == "timer":
                return on_timer(s, cfg, ev, 10 * i)
            if kind == "write":
                return begin_write(s, cfg, ev, b"w", 10 * i)
            return begin_read(s, cfg, ev, 10 * i)

        a, b = step(), step()
        assert s == before
        assert (a.messages, a.timers, a.replies, a.notes, a.state) == (b.messages, b.timers, b.replies, b.notes, b.state)
        s = a.state


def test_unknown_timer_rejected():
    with pytest.raises(ValueError):
        on_timer(initial_state(0, 3), config(), ("nope",), 0)


def test_digest_of_store_matches_hash_reply():
    cfg, states = circle(1)
    states[1].store["x"] = VersionedObject("x", b"v", CommitTimestamp(1, (0, 1)))
    eff = on_message(states[1], cfg, Message(Kind.HASH_REQUEST, 0, 1, 0, read_id=(0, 1), object_id="x"), 1)
    assert eff.messages[0].digest == object_digest(states[1].store["x"], cfg.digest_size)


def test_invalid_chain_heals_in_ccw_order():
    cfg, states = circle(1)
    obj = VersionedObject("x", b"v", CommitTimestamp(5, (2, 1)))
    states[2].store["x"] = obj
    states[0] = crash(states[0], cfg).state
    states[1] = crash(states[1], cfg).state
    # node 1 asks node 0, which is itself invalid and stays silent
    ask = on_timer(states[1], cfg, ("reval",), 0)
    assert [m.receiver for m in ask.messages] == [0]
    pump(states, cfg, ask, 0)
    assert states[1].status is Status.INVALID
    # node 0 heals from node 2, then node 1's retry succeeds
    pump(states, cfg, on_timer(states[0], cfg, ("reval",), 10), 10)
    assert states[0].status is Status.VALID and states[0].store["x"] == obj
    pump(states, cfg, on_timer(states[1], cfg, ("reval",), 10 + cfg.retry), 10 + cfg.retry)
    assert states[1].status is Status.VALID and states[1].store["x"] == obj
