"""Scripted lower-bound executions against BMMB and completion measurement.

Star: ``k`` messages start at the leaves and the hub of a star whose hub
also touches one extra vertex ``v``.  Everything ``v`` learns passes through
the hub, one message per acknowledgment, so under the slow-synchronous
scheduler ``v`` finishes no earlier than ``(k - 1) f_ack``.

Crossing: on two parallel lines ``a_1..a_d`` and ``b_1..b_d`` joined only by
unreliable cross edges ``a_i - b_{i+1}`` and ``b_i - a_{i+1}``, ``m0`` starts
at ``a_1`` and ``m1`` at ``b_1``.  The *frontier* broadcast of ``m0`` by
``a_i`` (``i < d``) is held open for the full ``f_ack``: its sender's
backward neighbor hears it at once, the cross neighbor ``b_{i+1}`` hears it
after ``f_prog``, and the forward neighbor ``a_{i+1}`` only at the very end,
just before the ack (symmetrically for ``m1`` on the b-line).  Every other
broadcast is delivered to all G-neighbors and acknowledged instantly.  Each
line's own message therefore advances one hop per ``f_ack`` while the cross
deliveries keep every listener within the progress bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .engine import Ack, Deliver, Scheduler, run
from .errors import InvalidParameter
from .graph import DualGraph, make_double_line, make_star_bridge
from .bmmb import bmmb_automata
from .rational import fmt_time
from .schedulers import EagerScheduler, PlanScheduler, SlowSynchronousScheduler
from .trace import EngineConfig, Trace


class CrossingScheduler(PlanScheduler):
    """The crossing schedule on :func:`~mmbsim.graph.make_double_line` ``(d)``."""

    name = "crossing"

    def __init__(self, d: int):
        self.d = d

    def plan(self, inst, view):
        d, cfg = self.d, self.config
        v, b, iid = inst.sender, inst.bcast_at, inst.instance_id
        line, i = divmod(v, d)
        if inst.payload != line or i >= d - 1:
            for u in self.graph.adj_g[v]:
                yield Deliver(iid, u, b)
            yield Ack(iid, b)
            return
        if i >= 1:
            yield Deliver(iid, v - 1, b)
        yield Deliver(iid, (1 - line) * d + i + 1, b + cfg.f_prog)
        yield Deliver(iid, v + 1, b + cfg.f_ack)
        yield Ack(iid, b + cfg.f_ack)


@dataclass
class LowerBoundSetup:
    name: str
    graph: DualGraph
    scheduler: Scheduler
    arrivals: dict[int, list]
    expected_floor: Fraction
    config: EngineConfig


def star_lower_bound(k: int, config: EngineConfig) -> LowerBoundSetup:
    if k < 2:
        raise InvalidParameter("star lower bound needs k >= 2")
    g = make_star_bridge(k)
    arrivals = {i: [i] for i in range(k)}
    return LowerBoundSetup("star", g, SlowSynchronousScheduler(), arrivals, (k - 1) * config.f_ack, config)


def crossing_lower_bound(d: int, config: EngineConfig) -> LowerBoundSetup:
    if d < 2:
        raise InvalidParameter("crossing lower bound needs d >= 2")
    ratio = config.f_ack / config.f_prog
    if ratio.denominator != 1:
        raise InvalidParameter("crossing schedule needs f_ack to be an integer multiple of f_prog")
    g = make_double_line(d)
    arrivals = {0: [0], d: [1]}
    return LowerBoundSetup("crossing", g, CrossingScheduler(d), arrivals, (d - 2) * config.f_ack, config)


@dataclass
class Completion:
    per_message: dict[Any, Fraction | None]
    coverage: dict[Any, float]

    @property
    def overall(self) -> Fraction | None:
        """Latest per-message completion, or ``None`` if some message is unfinished."""
        if not self.per_message:
            return Fraction(0)
        if any(t is None for t in self.per_message.values()):
            return None
        return max(self.per_message.values())

    def to_dict(self) -> dict:
        return {
            "overall": None if self.overall is None else fmt_time(self.overall),
            "per_message": {str(m): None if t is None else fmt_time(t) for m, t in self.per_message.items()},
            "coverage": {str(m): c for m, c in self.coverage.items()},
        }


def measure_completion(trace: Trace, graph: DualGraph) -> Completion:
    """Per message, the time its origin's whole G-component has received it."""
    gets = trace.get_times()
    per, cov = {}, {}
    comp = graph.component_of
    for m, origin in sorted(trace.arrivals().items()):
        members = [v for v in range(graph.n) if comp[v] == comp[origin]]
        times = [gets.get((m, v)) for v in members]
        have = [t for t in times if t is not None]
        cov[m] = len(have) / len(members)
        per[m] = max(have) if len(have) == len(members) else None
    return Completion(per, cov)


@dataclass
class LowerBoundRun:
    setup: LowerBoundSetup
    trace: Trace
    completion: Completion

    @property
    def measured(self) -> Fraction | None:
        return self.completion.overall

    def certificate(self) -> dict:
        m = self.measured
        floor = self.setup.expected_floor
        return {
            "construction": self.setup.name,
            "floor": fmt_time(floor),
            "measured": None if m is None else fmt_time(m),
            "ratio": None if m is None or floor == 0 else float(m / floor),
            "holds": m is not None and m >= floor,
        }


def run_lower_bound(setup: LowerBoundSetup, seed: int = 0, scheduler: Scheduler | None = None) -> LowerBoundRun:
    """Run BMMB on the construction (optionally under another scheduler, for contrast)."""
    g = setup.graph
    trace = run(g, bmmb_automata(g.n), scheduler or setup.scheduler, setup.config, setup.arrivals, seed=seed)
    return LowerBoundRun(setup, trace, measure_completion(trace, g))


def eager_contrast(setup: LowerBoundSetup, seed: int = 0) -> LowerBoundRun:
    return run_lower_bound(setup, seed, EagerScheduler())
