"""Command line: validate scenarios, run them singly or in seeded batches, check traces.

Exit status: 0 when every audit passes, 1 on an audit failure, 2 on a
configuration or input error.
"""

from __future__ import annotations

import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import click

from .logical_clocks import TraceEvent, check_trace
from .protocol import ConfigError
from .scenario import Scenario, ScenarioError, load_scenario, validate_scenario
from .simnet import RunReport, run

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG = 0, 1, 2


def percentile(values: Sequence[int], q: float) -> int | None:
    """Nearest-rank percentile; None for no data."""
    if not values:
        return None
    ordered = sorted(values)
    rank = max(1, math.ceil(len(ordered) * q / 100))
    return ordered[rank - 1]


@dataclass
class BatchSummary:
    runs: int
    audits_passed: int
    write_success_rate: float | None
    read_success_rate: float | None
    l_write: dict[str, int | None]
    l_read: dict[str, int | None]
    failed_seeds: list[int] = field(default_factory=list)
    reports: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.audits_passed == self.runs

    def to_dict(self, with_reports: bool = True) -> dict:
        out = asdict(self)
        if not with_reports:
            del out["reports"]
        out["passed"] = self.passed
        return out


def _one(args) -> RunReport:
    scenario, seed = args
    return run(scenario, seed, keep_trace=False).report


def _rate(ok: int, total: int) -> float | None:
    return None if total == 0 else ok / total


def _percentiles(xs: Sequence[int]) -> dict[str, int | None]:
    return {f"p{q}": percentile(xs, q) for q in (50, 90, 99)}


def run_batch(scenario: Scenario, seeds: Sequence[int], jobs: int | None = None) -> BatchSummary:
    """Run every seed with its own generator and aggregate the reports."""
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("a batch needs at least one seed")
    jobs = jobs or os.cpu_count() or 1
    work = [(scenario, s) for s in seeds]
    if jobs == 1 or len(seeds) == 1:
        reports = [_one(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_one, work, chunksize=max(1, len(work) // (4 * jobs))))
    writes_ok = sum(r.writes["ok"] for r in reports)
    writes_all = sum(sum(r.writes.values()) for r in reports)
    reads_ok = sum(r.reads["ok"] + r.reads["hit"] for r in reports)
    reads_all = sum(sum(r.reads.values()) for r in reports)
    lw = [x for r in reports for x in r.l_write]
    lr = [x for r in reports for x in r.l_read]
    return BatchSummary(
        runs=len(reports),
        audits_passed=sum(r.passed for r in reports),
        write_success_rate=_rate(writes_ok, writes_all),
        read_success_rate=_rate(reads_ok, reads_all),
        l_write=_percentiles(lw),
        l_read=_percentiles(lr),
        failed_seeds=[r.seed for r in reports if not r.passed],
        reports=[r.to_dict() for r in reports],
    )


def _load(path: str) -> Scenario:
    try:
        return load_scenario(path)
    except (ScenarioError, OSError) as exc:
        click.echo(f"error: {path}: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


@click.group()
@click.version_option(package_name="artifact")
def main() -> None:
    """Simulate a replica circle with timed sequential consistency."""


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
def validate(file: str) -> None:
    """Check a scenario file and print its warnings."""
    sc = _load(file)
    for w in validate_scenario(sc).warnings:
        click.echo(f"warning: {w}")
    click.echo(f"ok: n={sc.n} N={sc.size} delta={sc.timing.delta} alpha={sc.timing.alpha} beta={sc.timing.beta}")


@main.command("run")
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None, help="Overrides the scenario's seed.")
@click.option("--trace", "trace_out", type=click.Path(dir_okay=False), help="Write the delivery trace here.")
@click.option("--report", "report_out", type=click.Path(dir_okay=False), help="Write the JSON report here.")
def run_cmd(file: str, seed: int | None, trace_out: str | None, report_out: str | None) -> None:
    """Execute one scenario to its horizon and audit it."""
    sc = _load(file)
    result = run(sc, seed)
    report = result.report
    report.warnings = validate_scenario(sc).warnings
    if trace_out:
        Path(trace_out).write_text("\n".join(result.trace) + "\n", encoding="utf-8")
    doc = json.dumps(report.to_dict(), indent=2)
    if report_out:
        Path(report_out).write_text(doc + "\n", encoding="utf-8")
    for name, v in report.audit.items():
        state = "n/a" if not v["applicable"] else ("pass" if v["passed"] else "FAIL")
        click.echo(f"{name:22s} {state:5s} checked={v['checked']} violations={v['violations']}")
    click.echo(f"writes {report.writes}  reads {report.reads}  trace {report.trace_digest}")
    sys.exit(EXIT_OK if report.passed else EXIT_AUDIT)


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--seeds", type=int, required=True, help="Number of seeds to run.")
@click.option("--first", type=int, default=0, show_default=True, help="First seed.")
@click.option("--jobs", type=int, default=None, help="Worker processes (default: CPU count).")
@click.option("--report", "report_out", type=click.Path(dir_okay=False), help="Write the JSON summary here.")
def batch(file: str, seeds: int, first: int, jobs: int | None, report_out: str | None) -> None:
    """Run seeds first..first+N-1 and summarise."""
    sc = _load(file)
    try:
        summary = run_batch(sc, range(first, first + seeds), jobs)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if report_out:
        Path(report_out).write_text(json.dumps(summary.to_dict(), indent=2) + "\n", encoding="utf-8")
    click.echo(json.dumps(summary.to_dict(with_reports=False), indent=2))
    sys.exit(EXIT_OK if summary.passed else EXIT_AUDIT)


@main.group()
def clocks() -> None:
    """Logical clock tools."""


def trace_events(lines) -> tuple[list[TraceEvent], dict[str, int]]:
    """Send/deliver records of a run trace as process events; drops are skipped."""
    procs: dict[str, int] = {}
    events: list[TraceEvent] = []
    for number, line in enumerate(lines, 1):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 9:
            raise ValueError(f"line {number}: expected 9 tab-separated fields, got {len(fields)}")
        _, action, mid, _, sender, receiver = fields[:6]
        if action == "send":
            events.append(TraceEvent(procs.setdefault(sender, len(procs)), "send", mid))
        elif action == "deliver":
            events.append(TraceEvent(procs.setdefault(receiver, len(procs)), "recv", mid))
        elif action != "drop":
            raise ValueError(f"line {number}: unknown action {action!r}")
    return events, procs


@clocks.command("check")
@click.argument("trace", type=click.Path(dir_okay=False))
def clocks_check(trace: str) -> None:
    """Compare vector and Lamport clocks with brute-force happened-before."""
    try:
        with open(trace, encoding="utf-8") as fh:
            events, procs = trace_events(fh)
        result = check_trace(events, max(1, len(procs)))
    except (OSError, ValueError) as exc:
        click.echo(f"error: {trace}: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(
        f"events={result.events} processes={len(procs)} pairs={result.pairs} "
        f"vector_mismatches={result.vector_mismatches} lamport_violations={result.lamport_violations}"
    )
    sys.exit(EXIT_OK if result.ok else EXIT_AUDIT)


if __name__ == "__main__":
    main()
