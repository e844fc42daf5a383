"""Consistency verdicts computed offline from a completed run's history."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from ..protocol import ABSENT
from .engine import RunRecord

MAX_EXAMPLES = 10


@dataclass
class Verdict:
    name: str
    checked: int = 0
    violations: list[str] = field(default_factory=list)
    count: int = 0
    applicable: bool = True
    unevaluated: int = 0

    @property
    def passed(self) -> bool:
        return self.count == 0

    def fail(self, why: str) -> None:
        self.count += 1
        if len(self.violations) < MAX_EXAMPLES:
            self.violations.append(why)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "applicable": self.applicable,
            "checked": self.checked,
            "violations": self.count,
            "unevaluated": self.unevaluated,
            "examples": list(self.violations),
        }


def valid_at(rec: RunRecord, node: int, g: int) -> bool:
    timeline = rec.status[node]
    i = bisect.bisect_right(timeline, g, key=lambda e: e[0]) - 1
    return timeline[i][1]


def _finalize_times(rec: RunRecord) -> dict:
    first: dict = {}
    for g, node, wid, _ in rec.finalized:
        first.setdefault((node, wid), g)
    return first


def finalized_or_invalid(rec: RunRecord) -> Verdict:
    """Every acceptor is finalized or invalid when the trigger's second beta window closes."""
    v = Verdict("finalized_or_invalid")
    done = _finalize_times(rec)
    for wid, w in rec.writes.items():
        close = w.close if w.decided is not None else w.start_deadline
        for node in w.accepted:
            if close > rec.end:
                v.unevaluated += 1
                continue
            v.checked += 1
            at = done.get((node, wid))
            if at is not None and at <= close:
                continue
            if valid_at(rec, node, close):
                v.fail(f"write {wid}: node {node} still valid and unfinalized at {close}")
    return v


def sequential_agreement(rec: RunRecord) -> Verdict:
    v = Verdict("sequential_agreement")
    commits: dict = {}
    for g, node, wid, commit in rec.finalized:
        v.checked += 1
        first = commits.setdefault(wid, (commit, node))
        if first[0] != commit:
            v.fail(f"write {wid}: node {first[1]} committed {first[0]} but node {node} committed {commit}")
        w = rec.writes.get(wid)
        if w is not None and w.commit is not None and w.commit != commit:
            v.fail(f"write {wid}: node {node} finalized {commit}, trigger decided {w.commit}")
    valid = [i for i, ok in enumerate(rec.final_valid) if ok]
    for i in valid:
        for key, hist in rec.final_history[i].items():
            if list(hist) != sorted(set(hist)):
                v.fail(f"node {i} key {key}: history not totally ordered")
            ids = [c.write_id for c in hist]
            if len(set(ids)) != len(ids):
                v.fail(f"node {i} key {key}: one write finalized under two commits")
            stored = rec.final_store[i].get(key)
            if hist and (stored is None or stored.commit_ts != hist[-1]):
                v.fail(f"node {i} key {key}: store regressed below its newest finalized version")
    for a_pos, a in enumerate(valid):
        for b in valid[a_pos + 1 :]:
            ha, hb = rec.final_history[a], rec.final_history[b]
            for key in set(ha) & set(hb):
                v.checked += 1
                common = set(ha[key]) & set(hb[key])
                oa = [c for c in ha[key] if c in common]
                ob = [c for c in hb[key] if c in common]
                if oa != ob:
                    v.fail(f"nodes {a},{b} key {key}: commit order differs on common versions")
    return v


def _held_during(rec: RunRecord, node: int, key: str, start: int, end: int) -> set[str]:
    timeline = rec.digests.get((node, key))
    if timeline is None:
        return {ABSENT}
    held = set()
    current = ABSENT
    for g, d in timeline:
        if g <= start:
            current = d
        elif g <= end:
            held.add(d)
    held.add(current)
    return held


def read_safety(rec: RunRecord) -> Verdict:
    v = Verdict("read_safety")
    need = rec.n + 1
    for r in rec.reads.values():
        if r.case not in ("success", "majority"):
            continue
        v.checked += 1
        backers = sum(r.digest in _held_during(rec, i, r.object_id, r.started, r.done) for i in range(rec.size))
        if backers < need:
            v.fail(f"read {r.read_id} returned {r.digest} held by {backers} < {need} nodes")
    return v


def write_quorum(rec: RunRecord) -> Verdict:
    v = Verdict("write_quorum")
    for wid, w in rec.writes.items():
        if w.commit is None:
            continue
        v.checked += 1
        confirmed = sum(1 for g in w.accepted.values() if g <= w.decided)
        if confirmed < rec.n:
            v.fail(f"write {wid} succeeded with {confirmed} < {rec.n} acceptors")
    return v


def monotonic_reads(rec: RunRecord) -> Verdict:
    v = Verdict("monotonic_reads")
    last: dict = {}
    for o in rec.observations:
        v.checked += 1
        k = (o.client, o.object_id)
        prev = last.get(k)
        if prev is not None and (o.version is None or o.version < prev):
            v.fail(f"client {o.client} key {o.object_id}: observed {o.version} after {prev} at {o.at}")
        if o.version is not None:
            last[k] = o.version if prev is None else max(prev, o.version)
    return v


def monotonic_writes(rec: RunRecord) -> Verdict:
    v = Verdict("monotonic_writes")
    last: dict = {}
    for out in rec.outcomes:
        if out.op != "write" or out.result != "ok":
            continue
        v.checked += 1
        prev = last.get(out.client)
        if prev is not None and out.version.value <= prev.value:
            v.fail(f"client {out.client}: write committed {out.version} after {prev}")
        last[out.client] = out.version
    return v


def delta_update(rec: RunRecord, delta: int, clients: dict, applicable: bool) -> Verdict:
    """Observations after t + delta + delta_client + delta_network see the write or newer.

    ``clients`` maps client id to ``(delta_client, delta_network)``.
    """
    v = Verdict("delta_update", applicable=applicable)
    if not applicable:
        return v
    writes = [o for o in rec.outcomes if o.op == "write" and o.result == "ok"]
    for w in writes:
        for o in rec.observations:
            if o.object_id != w.object_id:
                continue
            dc, dn = clients[o.client]
            if o.at < w.issued + delta + dc + dn:
                continue
            v.checked += 1
            if o.version is None or o.version < w.version:
                v.fail(f"client {o.client} saw {o.version} at {o.at}, write {w.version} issued at {w.issued}")
    return v


def clock_bound(rec: RunRecord, gamma: int) -> Verdict:
    v = Verdict("clock_bound", checked=1)
    if 2 * rec.max_clock_deviation > gamma:
        v.fail(f"a clock strayed {rec.max_clock_deviation} ticks from the reference, above gamma/2 = {gamma / 2}")
    return v


def audit(rec: RunRecord, *, delta: int, gamma: int, clients: dict, failure_free: bool) -> dict[str, Verdict]:
    verdicts = [
        finalized_or_invalid(rec),
        sequential_agreement(rec),
        read_safety(rec),
        write_quorum(rec),
        monotonic_reads(rec),
        monotonic_writes(rec),
        delta_update(rec, delta, clients, failure_free),
        clock_bound(rec, gamma),
    ]
    return {v.name: v for v in verdicts}
