"""Deterministic discrete-event execution of node automata over an abstract MAC layer.

The engine owns time, the event log and every legality check.  A pluggable
scheduler resolves the model's nondeterminism by proposing the next delivery
or acknowledgment; the engine rejects proposals that would break receive or
acknowledgment correctness instead of recording them.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

from .errors import ExecutionError, LivelockError, ModelViolation, SchedulerError
from .graph import DualGraph
from .rational import as_time
from .trace import ENHANCED, EngineConfig, Event, Trace


@dataclass(frozen=True)
class Deliver:
    instance_id: int
    receiver: int
    at: Fraction


@dataclass(frozen=True)
class Ack:
    instance_id: int
    at: Fraction


@dataclass(frozen=True)
class IdleUntil:
    at: Fraction


Decision = Deliver | Ack | IdleUntil


@dataclass
class InstanceState:
    """Live view of one local broadcast, shared read-only with schedulers."""

    instance_id: int
    sender: int
    payload: Any
    bcast_at: Fraction
    delivered: dict[int, Fraction] = field(default_factory=dict)
    acked_at: Fraction | None = None
    aborted_at: Fraction | None = None

    @property
    def terminated(self) -> bool:
        return self.acked_at is not None or self.aborted_at is not None


class NodeAutomaton:
    """Event-driven protocol running at one vertex.

    Subclasses react to callbacks and act through ``self.ctx``
    (``broadcast``, and in the enhanced model ``abort`` and ``set_timer``).
    """

    ctx: "NodeContext"

    def on_wake(self, ctx: "NodeContext") -> None:
        self.ctx = ctx

    def on_arrive(self, payload) -> None:
        pass

    def on_receive(self, payload, sender: int, reliable: bool) -> None:
        pass

    def on_ack(self, payload) -> None:
        pass

    def on_timer(self, tag) -> None:
        pass

    def digest(self) -> str:
        return ""


class NodeContext:
    __slots__ = ("_sim", "node", "rng")

    def __init__(self, sim: "_Sim", node: int, rng: random.Random):
        self._sim = sim
        self.node = node
        self.rng = rng

    @property
    def now(self) -> Fraction:
        return self._sim.now

    @property
    def busy(self) -> bool:
        return self.node in self._sim.busy

    def broadcast(self, payload) -> int:
        return self._sim.do_bcast(self.node, payload)

    def abort(self) -> None:
        self._sim.do_abort(self.node)

    def set_timer(self, delay, tag=None) -> None:
        self._sim.do_set_timer(self.node, as_time(delay), tag)


class EngineView:
    """What a scheduler may look at: time, open instances and the log so far."""

    def __init__(self, sim: "_Sim"):
        self._sim = sim

    @property
    def now(self) -> Fraction:
        return self._sim.now

    @property
    def graph(self) -> DualGraph:
        return self._sim.graph

    @property
    def config(self) -> EngineConfig:
        return self._sim.config

    @property
    def open_instances(self) -> Mapping[int, InstanceState]:
        return self._sim.open

    @property
    def events(self) -> Sequence[Event]:
        return self._sim.events

    def instance(self, instance_id: int) -> InstanceState:
        return self._sim.instances[instance_id]

    def pending_reliable(self, inst: InstanceState) -> list[int]:
        """G-neighbors of the sender that have not yet received ``inst``."""
        return [v for v in self._sim.graph.adj_g[inst.sender] if v not in inst.delivered]


class Scheduler:
    """Resolves delivery and acknowledgment timing.

    ``next`` returns the next :class:`Deliver`, :class:`Ack` or
    :class:`IdleUntil`, or ``None`` when it has nothing left to do.  It may be
    asked again without its previous answer having been applied, so it must
    not assume that returning a decision consumed it.
    """

    name = "scheduler"

    def reset(self, graph: DualGraph, config: EngineConfig, rng: random.Random) -> None:
        self.graph = graph
        self.config = config
        self.rng = rng

    def next(self, view: EngineView) -> Decision | None:
        raise NotImplementedError


class _Sim:
    def __init__(self, graph: DualGraph, automata: Sequence[NodeAutomaton], config: EngineConfig):
        self.graph = graph
        self.automata = automata
        self.config = config
        self.now = Fraction(0)
        self.events: list[Event] = []
        self.instances: dict[int, InstanceState] = {}
        self.open: dict[int, InstanceState] = {}
        self.busy: dict[int, int] = {}
        self.timers: list[tuple[Fraction, int, int, Any]] = []
        self._timer_seq = 0
        self._steps_at_now = 0

    # -- bookkeeping -----------------------------------------------------
    def _log(self, kind, node, instance=None, payload=None, sender=None, reliable=None) -> Event:
        ev = Event(len(self.events), self.now, kind, node, instance, payload, sender, reliable)
        self.events.append(ev)
        self._tick()
        return ev

    def _tick(self) -> None:
        self._steps_at_now += 1
        if self._steps_at_now > self.config.zero_delay_budget:
            raise LivelockError(
                f"more than {self.config.zero_delay_budget} steps at t={self.now}",
                seq=len(self.events) - 1,
            )

    def advance(self, t: Fraction) -> None:
        if t < self.now:
            raise SchedulerError(f"decision at {t} is in the past (now {self.now})")
        if t > self.now:
            for inst in self.open.values():
                if inst.aborted_at is None and inst.bcast_at + self.config.f_ack < t:
                    raise SchedulerError(
                        f"instance {inst.instance_id} of node {inst.sender} still open past "
                        f"bcast+f_ack={inst.bcast_at + self.config.f_ack}"
                    )
            self.now = t
            self._steps_at_now = 0

    # -- automaton actions ---------------------------------------------
    def do_bcast(self, node: int, payload) -> int:
        if node in self.busy:
            raise ExecutionError(
                f"node {node} broadcast {payload!r} while instance {self.busy[node]} is unterminated",
                node=node, seq=len(self.events),
            )
        iid = len(self.instances)
        inst = InstanceState(iid, node, payload, self.now)
        self.instances[iid] = inst
        self.open[iid] = inst
        self.busy[node] = iid
        self._log("bcast", node, iid, payload)
        return iid

    def do_abort(self, node: int) -> None:
        if self.config.model != ENHANCED:
            raise ModelViolation(f"node {node} called abort in the standard model", node=node, seq=len(self.events))
        iid = self.busy.pop(node, None)
        if iid is None:
            raise ExecutionError(f"node {node} aborted with nothing in flight", node=node, seq=len(self.events))
        inst = self.open.pop(iid)
        inst.aborted_at = self.now
        self._log("abort", node, iid, inst.payload)

    def do_set_timer(self, node: int, delay: Fraction, tag) -> None:
        if self.config.model != ENHANCED:
            raise ModelViolation(f"node {node} set a timer in the standard model", node=node, seq=len(self.events))
        if delay < 0:
            raise ExecutionError(f"negative timer delay {delay}", node=node, seq=len(self.events))
        self._timer_seq += 1
        heapq.heappush(self.timers, (self.now + delay, self._timer_seq, node, tag))
        self._log("timer_set", node, payload=tag)

    # -- MAC-layer outputs ------------------------------------------------
    def fire_timer(self) -> None:
        t, _, node, tag = heapq.heappop(self.timers)
        self.advance(t)
        self._log("timer_fire", node, payload=tag)
        self.automata[node].on_timer(tag)

    def apply(self, d: Decision) -> None:
        if isinstance(d, IdleUntil):
            self.advance(as_time(d.at))
            self._tick()
            return
        inst = self.instances.get(d.instance_id)
        if inst is None:
            raise SchedulerError(f"unknown instance {d.instance_id}")
        at = as_time(d.at)
        if isinstance(d, Deliver):
            r = d.receiver
            if inst.acked_at is not None:
                raise SchedulerError(f"delivery of instance {inst.instance_id} after its ack")
            if inst.aborted_at is not None and at > inst.aborted_at + self.config.eps_abort:
                raise SchedulerError(f"delivery of instance {inst.instance_id} later than eps_abort after abort")
            if r == inst.sender or r not in self.graph.nbr_gp[inst.sender]:
                raise SchedulerError(f"node {r} is not an E' neighbor of {inst.sender}")
            if r in inst.delivered:
                raise SchedulerError(f"duplicate delivery of instance {inst.instance_id} to {r}")
            self.advance(at)
            inst.delivered[r] = at
            reliable = r in self.graph.nbr_g[inst.sender]
            self._log("rcv", r, inst.instance_id, inst.payload, inst.sender, reliable)
            self.automata[r].on_receive(inst.payload, inst.sender, reliable)
        elif isinstance(d, Ack):
            if inst.terminated:
                raise SchedulerError(f"instance {inst.instance_id} already terminated")
            missing = [v for v in self.graph.adj_g[inst.sender] if v not in inst.delivered]
            if missing:
                raise SchedulerError(f"ack of instance {inst.instance_id} before G-neighbors {missing} received it")
            if at > inst.bcast_at + self.config.f_ack:
                raise SchedulerError(f"ack of instance {inst.instance_id} exceeds f_ack")
            self.advance(at)
            inst.acked_at = at
            del self.open[inst.instance_id]
            del self.busy[inst.sender]
            self._log("ack", inst.sender, inst.instance_id, inst.payload)
            self.automata[inst.sender].on_ack(inst.payload)
        else:
            raise SchedulerError(f"unknown decision {d!r}")


def run(
    graph: DualGraph,
    automata: Sequence[NodeAutomaton],
    scheduler: Scheduler,
    config: EngineConfig,
    arrivals: Mapping[int, Sequence] | None = None,
    horizon=None,
    seed: int = 0,
) -> Trace:
    """Execute ``automata`` on ``graph`` until quiescence or ``horizon``.

    All arrivals happen at time 0; several payloads at one node are handed
    over in ascending order.  Raises :class:`ExecutionError` subclasses for
    automaton misbehaviour and :class:`SchedulerError` for illegal proposals.
    """
    if len(automata) != graph.n:
        raise ExecutionError(f"need one automaton per vertex ({graph.n}), got {len(automata)}")
    horizon = None if horizon is None else as_time(horizon)
    sim = _Sim(graph, automata, config)
    for v in range(graph.n):
        automata[v].on_wake(NodeContext(sim, v, random.Random(f"{seed}/node/{v}")))
    for v in sorted(arrivals or {}):
        if not 0 <= v < graph.n:
            raise ExecutionError(f"arrival at unknown vertex {v}")
        for payload in sorted(arrivals[v]):
            sim._log("arrive", v, payload=payload)
            automata[v].on_arrive(payload)

    scheduler.reset(graph, config, random.Random(f"{seed}/scheduler"))
    view = EngineView(sim)
    truncated = False
    while True:
        decision = scheduler.next(view)
        t_timer = sim.timers[0][0] if sim.timers else None
        t_dec = None if decision is None else as_time(decision.at)
        if t_dec is None and t_timer is None:
            if sim.open:
                raise SchedulerError(f"scheduler stalled with {len(sim.open)} open instances at t={sim.now}")
            break
        use_timer = t_timer is not None and (t_dec is None or t_timer <= t_dec)
        t_next = t_timer if use_timer else t_dec
        if horizon is not None and t_next > horizon:
            truncated = True
            break
        if use_timer:
            sim.fire_timer()
        else:
            sim.apply(decision)

    return Trace(
        events=sim.events,
        graph=graph,
        config=config,
        digests={v: automata[v].digest() for v in range(graph.n)},
        truncated=truncated,
        horizon=horizon,
    )
