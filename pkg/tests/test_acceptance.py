"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import itertools
import os
import random
import subprocess
import sys
from dataclasses import replace

import pytest
from oracles import brute_force_hb, tree_comparisons

from tscsim.antientropy import compare_trees, merkle_build, run_sync
from tscsim.logical_clocks import Ordering, VectorTimestamp, awareness_horizon, random_trace, stamp_trace, tcc_valid, vector_compare
from tscsim.node import READ_PATH, WRITE_PATH
from tscsim.protocol import CommitTimestamp, VersionedObject
from tscsim.scenario import ClientSpec, Op, dump_scenario
from tscsim.simnet import Crash, constant, run
from tscsim.simnet.generate import failure_free_scenario, randomized_scenario, single_op_scenario

RANDOM_RUNS = int(os.environ.get("TSCSIM_RANDOM_RUNS", "10000"))
MUTANT_SEEDS = 100


def test_c1_message_counts(verdict):
    rep = run(single_op_scenario(n=2)).report
    write = sum(rep.messages.get(k.value, 0) for k in WRITE_PATH)
    read = sum(rep.messages.get(k.value, 0) for k in READ_PATH)
    internal = sum(c for k, c in rep.messages.items() if not k.startswith("Client"))
    ok = (write, read, internal) == (12, 8, 20) and rep.passed
    verdict(1, ok, f"write-path {write} (want 12), read-path {read} (want 8), other internal {internal - write - read}")
    assert ok


@pytest.fixture(scope="module")
def random_audits():
    violations_fi = agreement = checked_c = checked_a = 0
    failing = []
    for seed in range(RANDOM_RUNS):
        v = run(randomized_scenario(seed), keep_trace=False).verdicts
        violations_fi += v["finalized_or_invalid"].count
        agreement += v["sequential_agreement"].count
        checked_c += v["finalized_or_invalid"].checked
        checked_a += v["sequential_agreement"].checked
        if not (v["finalized_or_invalid"].passed and v["sequential_agreement"].passed):
            failing.append(seed)
    return violations_fi, agreement, checked_c, checked_a, failing


def test_c2_finalized_or_invalid_audit(random_audits, verdict):
    violations, _, checked, _, failing = random_audits
    ok = violations == 0
    verdict(2, ok, f"{RANDOM_RUNS} runs, {checked} acceptor deadlines checked, {violations} violations {failing[:5]}")
    assert ok


def test_c3_sequential_agreement(random_audits, verdict):
    _, violations, _, checked, failing = random_audits
    ok = violations == 0
    verdict(3, ok, f"{RANDOM_RUNS} runs, {checked} finalizations and pairs checked, {violations} violations {failing[:5]}")
    assert ok


def test_c4_awareness_example(verdict):
    xs = awareness_horizon(VectorTimestamp((10, 22, 7, 0, 3), 0))
    xi = awareness_horizon(VectorTimestamp((2, 7, 5, 0, 1), 1))
    got = (xs, xi, xs - xi, tcc_valid(xs, xi, 26), tcc_valid(xs, xi, 27))
    ok = got == (42, 15, 27, False, True)
    verdict(4, ok, f"horizons {xs}/{xi}, staleness {xs - xi}, tcc(26)={got[3]}, tcc(27)={got[4]}")
    assert ok


def test_c5_vector_clocks_vs_happened_before(verdict):
    rng = random.Random(20261016)
    pairs = wrong = ordered = concurrent = 0
    for _ in range(1000):
        events, procs = random_trace(rng, 8, 50)
        assert procs <= 8 and len(events) <= 50
        vectors, _ = stamp_trace(events, procs)
        reach = brute_force_hb(events)
        for i, j in itertools.permutations(range(len(events)), 2):
            if i > j:
                continue
            pairs += 1
            o = vector_compare(vectors[i], vectors[j])
            if j in reach[i]:
                ordered += 1
                wrong += o is not Ordering.LESS
            elif i in reach[j]:
                ordered += 1
                wrong += o is not Ordering.GREATER
            else:
                concurrent += 1
                wrong += o is not Ordering.CONCURRENT
    ok = wrong == 0
    verdict(5, ok, f"1000 traces, {ordered} ordered + {concurrent} concurrent pairs, {wrong} disagreements")
    assert ok


LAT = 1_000


def crash_scenario(down: tuple[int, ...]):
    """Quiet 5-node circle, constant latencies, the listed nodes crashed for the whole run."""
    sc = single_op_scenario(n=2, latency=LAT)
    t = sc.timing
    clients = tuple(ClientSpec(f"c{h}", h, 1, 40_000, constant(LAT)) for h in range(sc.size))
    ops = []
    for k, c in enumerate(clients):
        base = 1_000 + k * 2 * t.delta
        ops += [Op(base, c.id, "write", "x", f"{c.id}-w"), Op(base + t.delta, c.id, "read", "x")]
    return replace(
        sc,
        clients=clients,
        workload=tuple(ops),
        faults=tuple(Crash(i, 0, None) for i in down),
        horizon=1_000 + 2 * t.delta * len(clients) + t.delta,
    )


def test_c6_quorum_availability(verdict):
    sc = crash_scenario(())
    alpha, omega = sc.timing.alpha, sc.timing.omega
    up_ok = up_all = down_rejected = down_all = 0
    slowest = {"write": 0, "read": 0}
    for down in itertools.combinations(range(5), 2):
        rec = run(crash_scenario(down), keep_trace=False).record
        up_all += len(rec.outcomes)
        up_ok += sum(o.result == "ok" for o in rec.outcomes)
    for down in itertools.combinations(range(5), 3):
        rec = run(crash_scenario(down), keep_trace=False).record
        for o in rec.outcomes:
            down_all += 1
            # the client-to-node hop costs LAT each way
            took = o.finished - o.issued - 2 * LAT
            limit = alpha if o.op == "write" else omega
            slowest[o.op] = max(slowest[o.op], took)
            down_rejected += o.result == "rejected" and took <= limit
    ok = up_ok == up_all == 100 and down_rejected == down_all == 100
    verdict(
        6, ok,
        f"2 down: {up_ok}/{up_all} ok; 3 down: {down_rejected}/{down_all} rejected in time "
        f"(slowest write {slowest['write']} <= {alpha}, read {slowest['read']} <= {omega})",
    )
    assert ok


def test_c7_anti_entropy(verdict):
    rng = random.Random(64)
    source = {
        f"obj{i:02d}": VersionedObject(f"obj{i:02d}", bytes(rng.randrange(256) for _ in range(16)), CommitTimestamp(i + 1, (0, i)))
        for i in range(64)
    }
    details, ok = [], True
    for k in (1, 5, 17):
        worst = 0
        for _ in range(50):
            target = dict(source)
            hit = rng.sample(range(64), k)
            for i in hit:
                o = target[f"obj{i:02d}"]
                raw = bytearray(o.value)
                raw[rng.randrange(len(raw))] ^= 1 + rng.randrange(255)
                target[o.object_id] = replace(o, value=bytes(raw))
            res = run_sync(source, target)
            expect = tree_comparisons(64, set(hit))
            _, comps = compare_trees(merkle_build(source), merkle_build(target))
            good = (
                len(res.transferred) == k
                and res.comparisons == comps == expect <= 2 * k * 7
                and all(res.store[key].value == source[key].value for key in source)
                and res.store == source
            )
            ok &= good
            worst = max(worst, res.comparisons)
        details.append(f"k={k}: worst {worst} <= {2 * k * 7}")
    verdict(7, ok, "50 random corruptions each, exact transfers, byte-identical; " + ", ".join(details))
    assert ok


def test_c8_delta_update(verdict):
    checked = violations = 0
    for seed in range(200):
        v = run(failure_free_scenario(seed), keep_trace=False).verdicts["delta_update"]
        assert v.applicable
        checked += v.checked
        violations += v.count
    ok = violations == 0 and checked > 0
    verdict(8, ok, f"200 failure-free runs, {checked} late observations checked, {violations} stale")
    assert ok


def test_c9_determinism(tmp_path, verdict):
    cases = [(single_op_scenario(), 0), (failure_free_scenario(5), 5)] + [(randomized_scenario(s), s) for s in (0, 7, 42)]
    same = True
    for sc, seed in cases:
        digests = {run(sc, seed).report.trace_digest for _ in range(3)}
        same &= len(digests) == 1
    # separate interpreters with different hash seeds
    path = tmp_path / "random.yaml"
    path.write_text(dump_scenario(randomized_scenario(11)))
    outs = set()
    for hashseed in ("0", "1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=hashseed)
        report = tmp_path / f"r{hashseed}.json"
        subprocess.run([sys.executable, "-m", "tscsim.cli", "run", str(path), "--report", str(report)],
                       env=env, check=False, capture_output=True)
        outs.add(report.read_text().split('"trace_digest": ')[1].split(",")[0])
    ok = same and len(outs) == 1
    verdict(9, ok, f"{len(cases)} scenarios x 3 in-process runs identical; 3 interpreter runs: {len(outs)} distinct digest")
    assert ok


def test_c10_mutant_is_caught(verdict):
    caught = []
    for seed in range(MUTANT_SEEDS):
        v = run(randomized_scenario(seed), keep_trace=False, beta_expiry_invalidates=False).verdicts["finalized_or_invalid"]
        if not v.passed:
            caught.append(seed)
    ok = bool(caught)
    first = caught[0] if caught else None
    verdict(10, ok, f"mutant without beta-expiry invalidation fails the finalized_or_invalid audit on {len(caught)}/{MUTANT_SEEDS} seeds, first at seed {first}")
    assert ok
