from pathlib import Path

import pytest

from tscsim.scenario import (
    ScenarioError,
    dump_scenario,
    load_scenario,
    parse_scenario,
    scenario_from_dict,
    validate_scenario,
)
from tscsim.simnet import Crash, Partition

SAMPLE = Path(__file__).resolve().parents[1] / "scenarios" / "single_write_read.yaml"


def base(**over):
    doc = {"n": 1, "timing": {"delta": 1000}}
    doc.update(over)
    return doc


def test_sample_loads_with_defaults():
    sc = load_scenario(SAMPLE)
    t = sc.timing
    assert (sc.size, t.alpha, t.beta, t.omega, t.gamma) == (5, 5000, 95000, 10000, 1000)
    assert t.sync_interval == 0 and sc.horizon == 10 * t.delta
    assert [c.home for c in sc.clients] == [0, 3]
    assert sc.clients[0].delta_client == t.delta and sc.clients[0].delta_network == 2 * t.omega
    assert validate_scenario(sc).warnings == []


def test_round_trip():
    sc = load_scenario(SAMPLE)
    assert parse_scenario(dump_scenario(sc)) == sc


def test_drift_turns_sync_on():
    sc = scenario_from_dict(base(clocks=[{"drift_ppm": 10}, {}, {"drift_ppm": -20}]))
    assert sc.max_drift_ppm == 20
    assert sc.timing.sync_interval > 0


def test_faults_parse():
    sc = scenario_from_dict(base(faults=[
        {"kind": "crash", "node": 1, "start": 10, "end": 50},
        {"kind": "partition", "nodes": [0, 2], "start": 0},
    ]))
    assert sc.faults == (Crash(1, 10, 50), Partition(frozenset({0, 2}), 0, None))


@pytest.mark.parametrize(
    "doc, where",
    [
        (base(n=0), "n:"),
        (base(timing={"delta": 1000, "alpha": 600, "beta": 500}), "timing: alpha \\+ beta"),
        (base(clocks=[{}]), "clocks: expected 3"),
        (base(bogus=1), "<root>"),
        (base(latency={"kind": "gaussian", "params": [1]}), "latency.kind"),
        (base(latency={"kind": "uniform", "params": [5, 1]}), "latency"),
        (base(clients=[{"id": "a", "home": 9}]), "clients\\[0\\].home"),
        (base(clients=[{"id": "a"}, {"id": "a"}]), "duplicate"),
        (base(clients=[{"id": "a"}], workload=[{"at": 0, "client": "b", "op": "read", "key": "x"}]), "workload\\[0\\].client"),
        (base(clients=[{"id": "a"}], workload=[{"at": 0, "client": "a", "op": "write", "key": "x"}]), "value"),
        (base(faults=[{"kind": "crash", "node": 7, "start": 0}]), "faults\\[0\\]"),
        (base(faults=[{"kind": "crash", "start": 0}]), "faults\\[0\\]"),
        (base(drops={"Nope": 0.5}), "drops"),
    ],
)
def test_errors_name_the_field(doc, where):
    with pytest.raises(ScenarioError, match=where):
        scenario_from_dict(doc)


def test_yaml_errors_report_position():
    with pytest.raises(ScenarioError, match="line 2, column 21"):
        parse_scenario("n: 1\ntiming: {delta: 1000]\n")


def test_soft_warnings():
    sc = scenario_from_dict(base(timing={"delta": 1000, "alpha": 500}, clients=[{"id": "a", "delta_network": 5}]))
    warnings = validate_scenario(sc).warnings
    assert len(warnings) == 2
