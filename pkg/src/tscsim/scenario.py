"""Scenario files: YAML documents checked against a JSON schema, then semantically.

Only ``n`` and ``timing.delta`` are required; everything else has a default
that :func:`dump_scenario` writes out explicitly, so a dumped scenario reloads
to an equal value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import yaml

from .node import Kind
from .protocol import ConfigError, TimingConfig, quorum_config, validate_timing
from .simnet.faults import Corrupt, Crash, Fault, Partition, check_fault
from .simnet.latency import KINDS, LatencyModel
from .timebase import PPM, required_sync_interval


class ScenarioError(ConfigError):
    """Raised for unreadable or invalid scenario documents."""


_LATENCY = {
    "type": "object",
    "required": ["kind", "params"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": sorted(KINDS)},
        "params": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1, "maxItems": 3},
    },
}
_TICKS = {"type": "integer", "minimum": 0}
_OPT_TICKS = {"type": ["integer", "null"], "minimum": 0}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "tscsim scenario",
    "type": "object",
    "required": ["n", "timing"],
    "additionalProperties": False,
    "properties": {
        "n": {"type": "integer"},
        "timing": {
            "type": "object",
            "required": ["delta"],
            "additionalProperties": False,
            "properties": {
                "delta": {"type": "integer"},
                "alpha": {"type": "integer"},
                "beta": {"type": "integer"},
                "omega": {"type": "integer"},
                "gamma": {"type": "integer"},
                "sync_interval": _TICKS,
                "sync_max_rtt": _TICKS,
                "idle_ticks": _TICKS,
                "revalidation_retry": _TICKS,
            },
        },
        "clocks": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {"offset": {"type": "integer"}, "drift_ppm": {"type": "integer"}},
            },
        },
        "latency": _LATENCY,
        "sync_latency": {"oneOf": [_LATENCY, {"type": "null"}]},
        "links": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["src", "dst", "latency"],
                "additionalProperties": False,
                "properties": {"src": {"type": "integer"}, "dst": {"type": "integer"}, "latency": _LATENCY},
            },
        },
        "processing": {"type": "array", "items": _TICKS},
        "clients": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "home": {"type": "integer"},
                    "delta_client": {"type": "integer", "minimum": 1},
                    "delta_network": {"type": "integer", "minimum": 1},
                    "latency": _LATENCY,
                },
            },
        },
        "workload": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["at", "client", "op", "key"],
                "additionalProperties": False,
                "properties": {
                    "at": _TICKS,
                    "client": {"type": "string"},
                    "op": {"enum": ["read", "write"]},
                    "key": {"type": "string", "minLength": 1},
                    "value": {"type": ["string", "null"]},
                },
            },
        },
        "faults": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "additionalProperties": False,
                "properties": {
                    "kind": {"enum": ["partition", "crash", "corrupt"]},
                    "node": {"type": "integer"},
                    "nodes": {"type": "array", "items": {"type": "integer"}},
                    "start": _TICKS,
                    "end": _OPT_TICKS,
                    "key": {"type": "string"},
                    "byte": _TICKS,
                    "at": _TICKS,
                },
            },
        },
        "drops": {
            "type": "object",
            "propertyNames": {"enum": [k.value for k in Kind]},
            "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1},
        },
        "horizon": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
    },
}


@dataclass(frozen=True)
class Timing:
    delta: int
    alpha: int
    beta: int
    omega: int
    gamma: int
    sync_interval: int = 0  # 0 disables periodic synchronization
    sync_max_rtt: int = 0
    idle_ticks: int = 0
    revalidation_retry: int = 0

    def protocol(self) -> TimingConfig:
        return TimingConfig(self.delta, self.alpha, self.beta, self.omega, self.gamma)


@dataclass(frozen=True)
class ClockSpec:
    offset: int = 0
    drift_ppm: int = 0


@dataclass(frozen=True)
class ClientSpec:
    id: str
    home: int
    delta_client: int
    delta_network: int
    latency: LatencyModel


@dataclass(frozen=True)
class Op:
    at: int
    client: str
    op: str
    key: str
    value: str | None = None


@dataclass(frozen=True)
class Scenario:
    n: int
    timing: Timing
    clocks: tuple[ClockSpec, ...]
    latency: LatencyModel
    sync_latency: LatencyModel | None = None
    links: tuple[tuple[int, int, LatencyModel], ...] = ()
    processing: tuple[int, ...] = ()
    clients: tuple[ClientSpec, ...] = ()
    workload: tuple[Op, ...] = ()
    faults: tuple[Fault, ...] = ()
    drops: tuple[tuple[str, float], ...] = ()
    horizon: int = 0
    seed: int = 0

    @property
    def size(self) -> int:
        return 2 * self.n + 1

    @property
    def max_drift_ppm(self) -> int:
        return max((abs(c.drift_ppm) for c in self.clocks), default=0)


def _latency(raw: Mapping | None, where: str, fallback: LatencyModel | None = None) -> LatencyModel | None:
    if raw is None:
        return fallback
    try:
        return LatencyModel(raw["kind"], tuple(raw["params"]))
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _fault(raw: Mapping, where: str) -> Fault:
    kind = raw["kind"]
    try:
        if kind == "partition":
            return Partition(frozenset(raw["nodes"]), raw["start"], raw.get("end"))
        if kind == "crash":
            return Crash(raw["node"], raw["start"], raw.get("end"))
        return Corrupt(raw["node"], raw["key"], raw.get("byte", 0), raw["at"])
    except KeyError as exc:
        raise ScenarioError(f"{where}: {kind} fault needs field {exc.args[0]!r}") from None


def _default_timing(raw: Mapping, max_drift: int) -> Timing:
    delta = raw["delta"]
    alpha = raw.get("alpha", delta // 20 if "beta" not in raw else delta - raw["beta"])
    beta = raw.get("beta", delta - alpha)
    omega = raw.get("omega", 2 * alpha)
    gamma = raw.get("gamma", max(2, alpha // 5))
    max_rtt = raw.get("sync_max_rtt", gamma // 2)
    interval = raw.get("sync_interval")
    if interval is None:
        interval = 0
        if max_drift > 0:
            # keep every node within gamma/2 of the reference
            interval = required_sync_interval(max_drift, gamma // 2, max_rtt // 2 + 1)
    return Timing(
        delta,
        alpha,
        beta,
        omega,
        gamma,
        interval,
        max_rtt,
        raw.get("idle_ticks", 10 * delta),
        raw.get("revalidation_retry", max(1, delta // 4)),
    )


def scenario_from_dict(doc: Any) -> Scenario:
    """Validate a parsed document and build the :class:`Scenario`."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{path}: {exc.message}") from None
    try:
        quorum = quorum_config(doc["n"])
    except ConfigError as exc:
        raise ScenarioError(f"n: {exc}") from None
    size = quorum.N
    clocks = tuple(ClockSpec(c.get("offset", 0), c.get("drift_ppm", 0)) for c in doc.get("clocks", ()))
    if not clocks:
        clocks = (ClockSpec(),) * size
    if len(clocks) != size:
        raise ScenarioError(f"clocks: expected {size} entries for n={doc['n']}, got {len(clocks)}")
    for i, c in enumerate(clocks):
        if not -PPM < c.drift_ppm < PPM:
            raise ScenarioError(f"clocks[{i}].drift_ppm: must lie strictly inside (-1e6, 1e6)")
    try:
        timing = _default_timing(doc["timing"], max(abs(c.drift_ppm) for c in clocks))
        validate_timing(timing.protocol())
    except ConfigError as exc:
        raise ScenarioError(f"timing: {exc}") from None
    if timing.sync_max_rtt == 0 and timing.sync_interval:
        raise ScenarioError("timing.sync_max_rtt: must be positive when synchronization is enabled")

    latency = _latency(doc.get("latency"), "latency", LatencyModel())
    links = []
    for i, link in enumerate(doc.get("links", ())):
        for end in ("src", "dst"):
            if not 0 <= link[end] < size:
                raise ScenarioError(f"links[{i}].{end}: node {link[end]} outside 0..{size - 1}")
        links.append((link["src"], link["dst"], _latency(link["latency"], f"links[{i}].latency")))
    processing = tuple(doc.get("processing", (0,) * size))
    if len(processing) != size:
        raise ScenarioError(f"processing: expected {size} entries, got {len(processing)}")

    horizon = doc.get("horizon", 10 * timing.delta)
    clients = []
    for i, c in enumerate(doc.get("clients", ())):
        home = c.get("home", i % size)
        if not 0 <= home < size:
            raise ScenarioError(f"clients[{i}].home: node {home} outside 0..{size - 1}")
        clients.append(
            ClientSpec(
                c["id"],
                home,
                c.get("delta_client", timing.delta),
                c.get("delta_network", 2 * timing.omega),
                _latency(c.get("latency"), f"clients[{i}].latency", latency),
            )
        )
    ids = [c.id for c in clients]
    if len(set(ids)) != len(ids):
        raise ScenarioError("clients: duplicate client id")
    workload = []
    for i, w in enumerate(doc.get("workload", ())):
        if w["client"] not in ids:
            raise ScenarioError(f"workload[{i}].client: unknown client {w['client']!r}")
        if w["at"] >= horizon:
            raise ScenarioError(f"workload[{i}].at: {w['at']} is not before horizon {horizon}")
        if w["op"] == "write" and w.get("value") is None:
            raise ScenarioError(f"workload[{i}].value: a write needs a value")
        workload.append(Op(w["at"], w["client"], w["op"], w["key"], w.get("value") if w["op"] == "write" else None))
    faults = []
    for i, f in enumerate(doc.get("faults", ())):
        fault = _fault(f, f"faults[{i}]")
        try:
            check_fault(fault, size, horizon)
        except ValueError as exc:
            raise ScenarioError(f"faults[{i}]: {exc}") from None
        faults.append(fault)
    return Scenario(
        n=quorum.n,
        timing=timing,
        clocks=clocks,
        latency=latency,
        sync_latency=_latency(doc.get("sync_latency"), "sync_latency"),
        links=tuple(links),
        processing=processing,
        clients=tuple(clients),
        workload=tuple(workload),
        faults=tuple(faults),
        drops=tuple(sorted(doc.get("drops", {}).items())),
        horizon=horizon,
        seed=doc.get("seed", 0),
    )


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    return parse_scenario(text)


def parse_scenario(text: str) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise ScenarioError(f"{where}{getattr(exc, 'problem', None) or exc}") from None
    return scenario_from_dict(doc)


def _latency_doc(m: LatencyModel) -> dict:
    return {"kind": m.kind, "params": list(m.params)}


def _fault_doc(f: Fault) -> dict:
    if isinstance(f, Partition):
        return {"kind": "partition", "nodes": sorted(f.nodes), "start": f.start, "end": f.end}
    if isinstance(f, Crash):
        return {"kind": "crash", "node": f.node, "start": f.start, "end": f.end}
    return {"kind": "corrupt", "node": f.node, "key": f.object_id, "byte": f.byte, "at": f.at}


def scenario_to_dict(sc: Scenario) -> dict:
    t = sc.timing
    doc: dict[str, Any] = {
        "n": sc.n,
        "timing": {
            "delta": t.delta,
            "alpha": t.alpha,
            "beta": t.beta,
            "omega": t.omega,
            "gamma": t.gamma,
            "sync_interval": t.sync_interval,
            "sync_max_rtt": t.sync_max_rtt,
            "idle_ticks": t.idle_ticks,
            "revalidation_retry": t.revalidation_retry,
        },
        "clocks": [{"offset": c.offset, "drift_ppm": c.drift_ppm} for c in sc.clocks],
        "latency": _latency_doc(sc.latency),
        "sync_latency": _latency_doc(sc.sync_latency) if sc.sync_latency else None,
        "links": [{"src": a, "dst": b, "latency": _latency_doc(m)} for a, b, m in sc.links],
        "processing": list(sc.processing),
        "clients": [
            {
                "id": c.id,
                "home": c.home,
                "delta_client": c.delta_client,
                "delta_network": c.delta_network,
                "latency": _latency_doc(c.latency),
            }
            for c in sc.clients
        ],
        "workload": [
            {"at": w.at, "client": w.client, "op": w.op, "key": w.key, **({"value": w.value} if w.op == "write" else {})}
            for w in sc.workload
        ],
        "faults": [_fault_doc(f) for f in sc.faults],
        "drops": dict(sc.drops),
        "horizon": sc.horizon,
        "seed": sc.seed,
    }
    return doc


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)


@dataclass
class Validation:
    scenario: Scenario
    warnings: list[str] = field(default_factory=list)


def validate_scenario(sc: Scenario) -> Validation:
    """Soft checks that do not block a run."""
    warnings = list(validate_timing(sc.timing.protocol()).warnings)
    for c in sc.clients:
        if c.delta_network <= sc.timing.omega:
            warnings.append(f"client {c.id}: delta_network {c.delta_network} <= omega; reads may time out client-side")
    if sc.timing.sync_interval == 0 and sc.max_drift_ppm > 0:
        warnings.append("clocks drift but synchronization is disabled")
    return Validation(sc, warnings)
