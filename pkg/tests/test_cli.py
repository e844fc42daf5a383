import json
from pathlib import Path

from click.testing import CliRunner

from tscsim.cli import main, percentile, run_batch, trace_events
from tscsim.simnet.generate import randomized_scenario

SAMPLE = str(Path(__file__).resolve().parents[1] / "scenarios" / "single_write_read.yaml")


def test_percentile_nearest_rank():
    assert percentile([], 50) is None
    assert percentile([5, 1, 3], 50) == 3
    assert percentile(list(range(1, 101)), 99) == 99


def test_validate_and_run(tmp_path):
    r = CliRunner().invoke(main, ["validate", SAMPLE])
    assert r.exit_code == 0 and r.output.startswith("ok: n=2")
    trace, report = tmp_path / "t.tsv", tmp_path / "r.json"
    r = CliRunner().invoke(main, ["run", SAMPLE, "--trace", str(trace), "--report", str(report)])
    assert r.exit_code == 0, r.output
    doc = json.loads(report.read_text())
    assert doc["passed"] and doc["writes"]["ok"] == 1
    r = CliRunner().invoke(main, ["clocks", "check", str(trace)])
    assert r.exit_code == 0 and "vector_mismatches=0" in r.output


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("n: 1\ntiming: {delta: 1000, alpha: 600, beta: 500}\n")
    r = CliRunner().invoke(main, ["run", str(bad)])
    assert r.exit_code == 2 and "alpha + beta" in r.output
    assert CliRunner().invoke(main, ["validate", str(tmp_path / "missing.yaml")]).exit_code == 2
    assert CliRunner().invoke(main, ["batch", SAMPLE, "--seeds", "0"]).exit_code == 2
    garbled = tmp_path / "t.tsv"
    garbled.write_text("1\tsend\n")
    assert CliRunner().invoke(main, ["clocks", "check", str(garbled)]).exit_code == 2


def test_batch(tmp_path):
    out = tmp_path / "b.json"
    r = CliRunner().invoke(main, ["batch", SAMPLE, "--seeds", "3", "--jobs", "1", "--report", str(out)])
    assert r.exit_code == 0, r.output
    summary = json.loads(out.read_text())
    assert summary["runs"] == 3 and len(summary["reports"]) == 3
    assert "reports" not in json.loads(r.output)


def test_run_batch_parallel_matches_serial():
    sc = randomized_scenario(1)
    a = run_batch(sc, range(4), jobs=1)
    b = run_batch(sc, range(4), jobs=2)
    assert a.to_dict() == b.to_dict()


def test_trace_events_skip_drops():
    lines = ["# header", "0\tsend\t1\tX\t0\t1\t-\t-\t-", "0\tdrop\t1\tX\t0\t1\t-\t-\tlink", "1\tsend\t2\tX\t1\t0\t-\t-\t-",
             "3\tdeliver\t2\tX\t1\t0\t-\t-\t-"]
    events, procs = trace_events(lines)
    assert [e.action for e in events] == ["send", "send", "recv"]
    assert procs == {"0": 0, "1": 1}
