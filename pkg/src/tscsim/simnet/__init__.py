"""Discrete-event simulation of a replica circle, with fault injection and audits."""

from .audit import Verdict, audit
from .engine import Delivered, Dropped, RunRecord, Simulation, deliver
from .faults import Corrupt, Crash, Partition, link_up
from .latency import LatencyModel, Network, constant, triangular, uniform
from .report import RunReport, RunResult, run

__all__ = [
    "Corrupt",
    "Crash",
    "Delivered",
    "Dropped",
    "LatencyModel",
    "Network",
    "Partition",
    "RunRecord",
    "RunReport",
    "RunResult",
    "Simulation",
    "Verdict",
    "audit",
    "constant",
    "deliver",
    "link_up",
    "run",
    "triangular",
    "uniform",
]
