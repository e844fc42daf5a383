"""Run a scenario once and summarise it as a :class:`RunReport`."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING

from .audit import Verdict, audit
from .engine import RunRecord, Simulation

if TYPE_CHECKING:
    from ..scenario import Scenario


@dataclass
class RunReport:
    seed: int
    horizon: int
    messages: dict[str, int]
    dropped: dict[str, int]
    writes: dict[str, int]
    reads: dict[str, int]
    invalidations: list[tuple[int, int, str]]
    revalidations: int
    audit: dict[str, dict]
    l_write: list[int]
    l_read: list[int]
    antientropy: dict[str, int]
    max_clock_deviation: int
    trace_digest: str | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.audit.values())

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class RunResult:
    report: RunReport
    trace: list[str]
    record: RunRecord
    verdicts: dict[str, Verdict]


def _tally(outcomes, op: str) -> dict[str, int]:
    out = {"ok": 0, "hit": 0, "rejected": 0, "timeout": 0}
    for o in outcomes:
        if o.op == op:
            out[o.result] += 1
    if op == "write":
        del out["hit"]
    return out


def failure_free(sc: Scenario) -> bool:
    return not sc.faults and not any(p > 0 for _, p in sc.drops)


def run(
    scenario: Scenario,
    seed: int | None = None,
    *,
    beta_expiry_invalidates: bool = True,
    keep_trace: bool = True,
) -> RunResult:
    """Execute ``scenario`` to its horizon and audit the recorded history."""
    sim = Simulation(scenario, seed, beta_expiry_invalidates=beta_expiry_invalidates, keep_trace=keep_trace).run()
    rec = sim.rec
    t = scenario.timing
    verdicts = audit(
        rec,
        delta=t.delta,
        gamma=t.gamma,
        clients={c.id: (c.delta_client, c.delta_network) for c in scenario.clients},
        failure_free=failure_free(scenario),
    )
    report = RunReport(
        seed=sim.seed,
        horizon=scenario.horizon,
        messages=dict(sorted(sim.counts.items())),
        dropped=dict(sorted(sim.dropped.items())),
        writes=_tally(rec.outcomes, "write"),
        reads=_tally(rec.outcomes, "read"),
        invalidations=list(rec.invalidations),
        revalidations=rec.revalidations,
        audit={name: v.to_dict() for name, v in verdicts.items()},
        l_write=[w.quorum_at - w.started for w in rec.writes.values() if w.quorum_at is not None],
        l_read=[r.done - r.started for r in rec.reads.values() if r.case == "success"],
        antientropy={
            "comparisons": rec.ae_comparisons,
            "objects": rec.ae_objects,
            "bytes": rec.ae_bytes,
            "sweep_transfers": rec.sweep_transfers,
        },
        max_clock_deviation=rec.max_clock_deviation,
        trace_digest=sim.trace_digest() if keep_trace else None,
    )
    return RunResult(report, sim.trace, rec, verdicts)
