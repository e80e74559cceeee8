"""Seeded faults: small trace mutations, one per checker violation kind.

Each fault takes a clean trace and returns a broken copy (or ``None`` when
the trace offers no place to inject it).  Mutations edit the event list
and then re-sort by time, renumbering ``seq``; inserted events are placed
right after an anchor event.
"""

from __future__ import annotations

import dataclasses
import random
from fractions import Fraction
from typing import Callable

from .bmmb import bmmb_automata
from .engine import run
from .graph import DualGraph, make_line, make_star_bridge
from .rounds import UniformOneAdversary, lower_to_trace, run_rounds, RoundProtocol
from .schedulers import EagerScheduler, SlowSynchronousScheduler
from .trace import ENHANCED, EngineConfig, Event, Trace


def _rebuild(trace: Trace, keyed: list[tuple[Fraction, float, Event]]) -> Trace:
    keyed.sort(key=lambda x: (x[0], x[1]))
    events = [dataclasses.replace(ev, seq=i, time=t) for i, (t, _, ev) in enumerate(keyed)]
    return dataclasses.replace(trace, events=events)


def _keyed(trace: Trace) -> list[tuple[Fraction, float, Event]]:
    return [(ev.time, float(ev.seq), ev) for ev in trace.events]


def _last_instances(trace: Trace) -> list:
    """Instances after which their sender never broadcasts again."""
    insts = trace.instances()
    last = {}
    for inst in insts.values():
        last[inst.sender] = inst
    return [i for i in last.values() if i.terminated is not None]


def well_formedness(trace: Trace, rng: random.Random) -> Trace | None:
    """Delay an ack past the same node's next bcast (same timestamp)."""
    insts = sorted(trace.instances().values(), key=lambda i: i.bcast_seq)
    nxt = {}
    for inst in insts:
        nxt.setdefault(inst.sender, [])
        nxt[inst.sender].append(inst)
    pairs = [(a, b) for seq in nxt.values() for a, b in zip(seq, seq[1:])
             if a.terminated and a.terminated[1] == b.bcast_at]
    if not pairs:
        return None
    a, b = rng.choice(pairs)
    keyed = [(t, float(b.bcast_seq) + 0.5 if ev.seq == a.terminated[2] else k, ev)
             for t, k, ev in _keyed(trace)]
    return _rebuild(trace, keyed)


def receive_correctness(trace: Trace, rng: random.Random) -> Trace | None:
    """Deliver an instance to a node outside its sender's E'-neighborhood."""
    g = trace.graph
    options = [(inst, v) for inst in trace.instances().values() for v in range(g.n)
               if v != inst.sender and v not in g.nbr_gp[inst.sender]]
    if not options:
        return None
    inst, v = rng.choice(options)
    keyed = _keyed(trace)
    ev = Event(0, inst.bcast_at, "rcv", v, inst.instance_id, inst.payload, inst.sender, False)
    keyed.append((inst.bcast_at, inst.bcast_seq + 0.5, ev))
    return _rebuild(trace, keyed)


def ack_correctness(trace: Trace, rng: random.Random) -> Trace | None:
    """Drop one G-neighbor's rcv of an acknowledged instance."""
    g = trace.graph
    options = [seq for inst in trace.instances().values()
               if inst.terminated and inst.terminated[0] == "ack"
               for v, _, seq in inst.rcv_events if v in g.nbr_g[inst.sender]]
    if not options:
        return None
    drop = rng.choice(options)
    return _rebuild(trace, [x for x in _keyed(trace) if x[2].seq != drop])


def termination(trace: Trace, rng: random.Random) -> Trace | None:
    """Remove the ack of a node's final instance, leaving it open in a complete trace."""
    options = [i for i in _last_instances(trace) if i.bcast_at + trace.config.f_ack >= trace.end_time]
    if not options:
        return None
    drop = rng.choice(options).terminated[2]
    out = _rebuild(trace, [x for x in _keyed(trace) if x[2].seq != drop])
    return dataclasses.replace(out, truncated=False)


def ack_bound(trace: Trace, rng: random.Random) -> Trace | None:
    """Move a node's final ack to ``bcast + f_ack + 1``."""
    options = [i for i in _last_instances(trace) if i.terminated[0] == "ack"]
    if not options:
        return None
    inst = rng.choice(options)
    late = inst.bcast_at + trace.config.f_ack + 1
    keyed = [(late, float("inf"), ev) if ev.seq == inst.terminated[2] else (t, k, ev)
             for t, k, ev in _keyed(trace)]
    return _rebuild(trace, keyed)


def progress_bound(trace: Trace, rng: random.Random) -> Trace | None:
    """Starve a listener for one full G-neighbor instance lasting longer than ``f_prog``.

    All its receptions that could discharge the bound for the window
    ``[bcast, termination]`` of that instance are removed.
    """
    g, f_prog = trace.graph, trace.config.f_prog
    insts = trace.instances()
    options = [(inst, j) for inst in insts.values()
               if inst.terminated and inst.terminated[1] - inst.bcast_at > f_prog
               for j in g.adj_g[inst.sender]]
    if not options:
        return None
    inst, j = rng.choice(options)
    s, e = inst.bcast_at, inst.terminated[1]
    drop = {seq for other in insts.values() if other.end is None or other.end >= s
            for v, t, seq in other.rcv_events if v == j and t <= e}
    return _rebuild(trace, [x for x in _keyed(trace) if x[2].seq not in drop])


def abort_bound(trace: Trace, rng: random.Random) -> Trace | None:
    """Move a rcv of an aborted instance to after its abort plus ``eps_abort``."""
    cfg = trace.config
    options = [(inst, seq) for inst in trace.instances().values()
               if inst.terminated and inst.terminated[0] == "abort"
               for _, _, seq in inst.rcv_events]
    if not options:
        return None
    inst, seq = rng.choice(options)
    late = inst.terminated[1] + cfg.eps_abort + cfg.f_prog / 4
    keyed = [(late, k, ev) if ev.seq == seq else (t, k, ev) for t, k, ev in _keyed(trace)]
    return _rebuild(trace, keyed)


FAULTS: dict[str, Callable[[Trace, random.Random], Trace | None]] = {
    "well-formedness": well_formedness,
    "receive-correctness": receive_correctness,
    "ack-correctness": ack_correctness,
    "termination": termination,
    "ack-bound": ack_bound,
    "progress-bound": progress_bound,
    "abort-bound": abort_bound,
}


class _FloodRounds(RoundProtocol):
    """Every informed node rebroadcasts the token with probability 1/2 each round."""

    def __init__(self, n: int, seed):
        self.informed = {0}
        self.rng = random.Random(f"{seed}/flood")

    def intents(self, r):
        return {v: "tok" for v in sorted(self.informed) if self.rng.random() < 0.5}

    def receive(self, r, deliveries):
        self.informed.update(deliveries)


def base_trace(kind: str, seed: int = 0) -> Trace:
    """A clean trace suited to injecting the fault ``kind``.

    Eager-scheduler BMMB on a line for the ack-level faults (each instance
    lasts exactly ``f_prog``, so no progress window is ever affected),
    slow-synchronous BMMB on a star bridge for the progress fault, and a
    lowered round execution (enhanced model, with aborts) for the abort fault.
    """
    cfg = EngineConfig(8, 1)
    if kind == "progress-bound":
        g = make_star_bridge(4)
        return run(g, bmmb_automata(g.n), SlowSynchronousScheduler(), cfg, {i: [i] for i in range(4)}, seed=seed)
    if kind == "abort-bound":
        g = make_line(6)
        rt = run_rounds(g, _FloodRounds(g.n, seed), UniformOneAdversary(), 12, seed=seed)
        return lower_to_trace(rt, EngineConfig(8, 1, model=ENHANCED), g)
    g = make_line(8)
    return run(g, bmmb_automata(g.n), EagerScheduler(), cfg, {0: [0, 1, 2], 5: [3]}, seed=seed)


def inject(kind: str, seed: int = 0, trace: Trace | None = None) -> Trace:
    """Apply fault ``kind`` to ``trace`` (default: :func:`base_trace`)."""
    trace = base_trace(kind, seed) if trace is None else trace
    out = FAULTS[kind](trace, random.Random(f"{seed}/fault/{kind}"))
    if out is None:
        raise ValueError(f"trace offers no site for a {kind} fault")
    return out
