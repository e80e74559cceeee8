"""Basic Multi-Message Broadcast and its time-bound assertions.

BMMB floods every message once: a node keeps a FIFO queue of messages it has
received but not yet broadcast, broadcasts the head whenever it is idle, and
discards copies of messages it has seen before.

The assertions reconstruct, per node ``i``, the sets ``R_i(t)`` (messages
received or arrived by ``t``) and ``C_i(t)`` (messages whose broadcast ``i``
completed by ``t``) from a trace and test the bounds:

* arbitrary G': at ``(d + l) * f_ack`` the completed set holds ``m`` or at
  least ``l`` messages, and ``m`` is received by ``(d + k) * f_ack``;
* r-restricted G': with ``t(d, l) = (d + (r+1)l - 2) f_prog + r (l-1) f_ack``,
  ``R_j(t(d,l))`` holds ``m`` or ``l`` messages and
  ``C_j(t(d,l) + f_ack)`` holds ``m`` or ``l`` messages.

"At time T" means after every event with time ``<= T``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .engine import NodeAutomaton
from .errors import AnalysisError, InvalidParameter, PreconditionViolation
from .graph import DualGraph, is_r_restricted
from .rational import as_time, fmt_time
from .trace import EngineConfig, Trace


class BmmbAutomaton(NodeAutomaton):
    def __init__(self):
        self.bcastq: deque = deque()
        self.rcvd: set = set()
        self.sent: set = set()
        self.in_flight: Any = None

    def _take(self, payload) -> None:
        if payload in self.rcvd:
            return
        self.rcvd.add(payload)
        self.bcastq.append(payload)
        self._pump()

    def _pump(self) -> None:
        if self.in_flight is None and self.bcastq:
            self.in_flight = self.bcastq[0]
            self.ctx.broadcast(self.in_flight)

    def on_arrive(self, payload) -> None:
        self._take(payload)

    def on_receive(self, payload, sender, reliable) -> None:
        self._take(payload)

    def on_ack(self, payload) -> None:
        head = self.bcastq.popleft()
        assert head == payload == self.in_flight
        self.sent.add(head)
        self.in_flight = None
        self._pump()

    def digest(self) -> str:
        return json.dumps({"rcvd": sorted(self.rcvd), "sent": sorted(self.sent),
                           "queue": list(self.bcastq)}, separators=(",", ":"))


def bmmb_automata(n: int) -> list[BmmbAutomaton]:
    return [BmmbAutomaton() for _ in range(n)]


@dataclass
class NodeTimeline:
    """Per-node get and ack times, with the derived sets ``R_i(t)``, ``C_i(t)``."""

    node: int
    get: dict[Any, Fraction] = field(default_factory=dict)
    ack: dict[Any, Fraction] = field(default_factory=dict)

    def received(self, t) -> set:
        t = as_time(t)
        return {m for m, g in self.get.items() if g <= t}

    def completed(self, t) -> set:
        t = as_time(t)
        return {m for m, a in self.ack.items() if a <= t}


_BMMB_KINDS = {"arrive", "bcast", "rcv", "ack"}


def build_timeline(trace: Trace, n: int | None = None) -> list[NodeTimeline]:
    if n is None:
        n = trace.graph.n if trace.graph is not None else 1 + max((e.node for e in trace.events), default=-1)
    lines = [NodeTimeline(v) for v in range(n)]
    for ev in trace.events:
        if ev.kind not in _BMMB_KINDS:
            raise AnalysisError(f"event seq {ev.seq} of kind {ev.kind!r} cannot occur in a BMMB run")
        if ev.kind in ("arrive", "rcv"):
            lines[ev.node].get.setdefault(ev.payload, ev.time)
        elif ev.kind == "ack":
            if ev.payload in lines[ev.node].ack:
                raise AnalysisError(f"node {ev.node} completed {ev.payload!r} twice")
            lines[ev.node].ack[ev.payload] = ev.time
    return lines


@dataclass(frozen=True)
class Counterexample:
    claim: str
    message: Any
    node: int
    distance: int
    ell: int | None
    at: Fraction
    detail: str

    def to_dict(self) -> dict:
        return {"claim": self.claim, "message": self.message, "node": self.node,
                "distance": self.distance, "ell": self.ell, "at": fmt_time(self.at),
                "detail": self.detail}


@dataclass
class AssertionReport:
    name: str
    checked: int = 0
    counterexamples: list[Counterexample] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.counterexamples

    def to_dict(self) -> dict:
        return {"assertion": self.name, "ok": self.ok, "checked": self.checked,
                "counterexamples": [c.to_dict() for c in self.counterexamples]}


def _origins(trace: Trace) -> dict[Any, int]:
    origins = {}
    for ev in trace.events:
        if ev.kind == "arrive":
            if ev.time != 0:
                raise PreconditionViolation(f"message {ev.payload!r} arrives at t={ev.time}, not 0")
            if ev.payload in origins:
                raise PreconditionViolation(f"message {ev.payload!r} arrives at two nodes")
            origins[ev.payload] = ev.node
    return origins


def assert_arbitrary_bound(trace: Trace, graph: DualGraph, config: EngineConfig,
                           k: int | None = None) -> AssertionReport:
    """Sent-set claim behind the ``O((D + k) f_ack)`` bound for arbitrary G'."""
    origins = _origins(trace)
    k = len(origins) if k is None else k
    lines = build_timeline(trace, graph.n)
    if not any(line.ack for line in lines) and any(e.kind == "bcast" for e in trace.events):
        raise AnalysisError("trace has broadcasts but no acks; sent sets cannot be reconstructed")
    f_ack = config.f_ack
    rep = AssertionReport("arbitrary-bound")
    for m, u in sorted(origins.items()):
        for v, d in sorted(graph.dist_g[u].items()):
            line = lines[v]
            for ell in range(1, k + 1):
                t = (d + ell) * f_ack
                sent = line.completed(t)
                rep.checked += 1
                if m not in sent and len(sent) < ell:
                    rep.counterexamples.append(Counterexample(
                        "sent", m, v, d, ell, t,
                        f"sent set at {t} is {sorted(sent)}: lacks {m!r} and has fewer than {ell}"))
            t = (d + k) * f_ack
            rep.checked += 1
            if line.get.get(m, t + 1) > t:
                rep.counterexamples.append(Counterexample(
                    "delivery", m, v, d, None, t, f"node {v} has not received {m!r} by {t}"))
    return rep


def t_bound(d: int, ell: int, r: int, config: EngineConfig) -> Fraction:
    """``(d + (r+1) l - 2) f_prog + r (l - 1) f_ack``, clamped at 0."""
    if ell < 1:
        raise InvalidParameter("ell must be >= 1")
    if d < 0 or r < 1:
        raise InvalidParameter("need d >= 0 and r >= 1")
    t = (d + (r + 1) * ell - 2) * config.f_prog + r * (ell - 1) * config.f_ack
    return max(t, Fraction(0))


def assert_r_restricted_bound(trace: Trace, graph: DualGraph, config: EngineConfig, r: int,
                              k: int | None = None) -> AssertionReport:
    """Both parts of the r-restricted bound, for every (m, j, l)."""
    if not is_r_restricted(graph, r):
        raise PreconditionViolation(f"graph is not {r}-restricted")
    origins = _origins(trace)
    k = len(origins) if k is None else k
    lines = build_timeline(trace, graph.n)
    rep = AssertionReport("r-restricted-bound")
    for m, i0 in sorted(origins.items()):
        for j, d in sorted(graph.dist_g[i0].items()):
            line = lines[j]
            for ell in range(1, k + 1):
                t = t_bound(d, ell, r, config)
                got = line.received(t)
                rep.checked += 1
                if m not in got and len(got) < ell:
                    rep.counterexamples.append(Counterexample(
                        "received", m, j, d, ell, t,
                        f"R_{j}({t}) = {sorted(got)}: lacks {m!r} and has fewer than {ell}"))
                t2 = t + config.f_ack
                done = line.completed(t2)
                rep.checked += 1
                if m not in done and len(done) < ell:
                    rep.counterexamples.append(Counterexample(
                        "completed", m, j, d, ell, t2,
                        f"C_{j}({t2}) = {sorted(done)}: lacks {m!r} and has fewer than {ell}"))
    return rep


def queue_law_holds(trace: Trace, n: int) -> bool:
    """Replays a BMMB trace and checks queue contents equal ``R_i(t) - C_i(t)``.

    The queue is reconstructed from events alone (arrive/first rcv append,
    ack pops the head); each ack must complete the current head and each
    bcast must broadcast it.
    """
    queues = [deque() for _ in range(n)]
    seen = [set() for _ in range(n)]
    done = [set() for _ in range(n)]
    for ev in trace.events:
        v = ev.node
        if ev.kind in ("arrive", "rcv") and ev.payload not in seen[v]:
            seen[v].add(ev.payload)
            queues[v].append(ev.payload)
        elif ev.kind == "bcast":
            if not queues[v] or queues[v][0] != ev.payload:
                return False
        elif ev.kind == "ack":
            if not queues[v] or queues[v].popleft() != ev.payload:
                return False
            done[v].add(ev.payload)
        if set(queues[v]) != seen[v] - done[v]:
            return False
    return True
