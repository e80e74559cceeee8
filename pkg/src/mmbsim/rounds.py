"""Lock-step rounds on top of the enhanced MAC layer.

Each round lasts ``f_prog``: a broadcaster starts its broadcast at the round
start and aborts it at the round end.  Within a round the delivery adversary
decides who hears whom, subject to:

* (R1) a silent node with a broadcasting G-neighbor hears something;
* (R2) broadcasters hear nothing in their own round;
* every delivery comes from a broadcasting E'-neighbor.

:func:`lower_to_trace` turns a round execution back into an ordinary
engine trace so the MAC-layer checker can certify it.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping

from .errors import AdversaryError
from .graph import DualGraph
from .trace import ENHANCED, EngineConfig, Event, Trace

Delivery = tuple[int, Any, bool]  # (sender, payload, reliable)


class RoundProtocol:
    """Collective state of all node automata in a round-based protocol.

    ``intents`` returns ``{node: payload}`` for the nodes broadcasting in
    round ``r``; ``receive`` hands over each node's deliveries.  ``done``
    lets a protocol stop early once nothing observable can change.
    """

    def intents(self, r: int) -> Mapping[int, Any]:
        raise NotImplementedError

    def receive(self, r: int, deliveries: Mapping[int, list[Delivery]]) -> None:
        raise NotImplementedError

    def done(self, r: int) -> bool:
        return False

    def digest(self) -> dict:
        return {}


class RoundAdversary:
    """Chooses, per round, which broadcasters each silent node hears."""

    name = "adversary"

    def choose(self, r: int, broadcasters: Mapping[int, Any], graph: DualGraph,
               rng: random.Random) -> dict[int, list[int]]:
        candidates: dict[int, list[int]] = {}
        for u in sorted(broadcasters):
            for v in graph.adj_gp[u]:
                if v not in broadcasters:
                    candidates.setdefault(v, []).append(u)
        return {v: [self.pick(v, cs, graph, rng)] for v, cs in sorted(candidates.items())}

    def pick(self, v: int, candidates: list[int], graph: DualGraph, rng: random.Random) -> int:
        raise NotImplementedError


class UniformOneAdversary(RoundAdversary):
    """Deliver exactly one broadcaster in E'-range, chosen uniformly."""

    name = "uniform"

    def pick(self, v, candidates, graph, rng):
        return candidates[rng.randrange(len(candidates))]


class SpitefulAdversary(RoundAdversary):
    """Like uniform-one, but prefer unreliable (E' only) senders when any exist."""

    name = "spiteful"

    def pick(self, v, candidates, graph, rng):
        nbr_g = graph.nbr_g[v]
        extra = [u for u in candidates if u not in nbr_g]
        pool = extra or candidates
        return pool[rng.randrange(len(pool))]


ADVERSARIES = {"uniform": UniformOneAdversary, "spiteful": SpitefulAdversary}


def make_adversary(name: str) -> RoundAdversary:
    try:
        return ADVERSARIES[name]()
    except KeyError:
        raise ValueError(f"unknown round adversary {name!r}; choose from {sorted(ADVERSARIES)}") from None


@dataclass
class RoundRecord:
    round: int
    broadcasts: dict[int, Any]
    deliveries: dict[int, list[int]]


@dataclass
class RoundTrace:
    """Sparse record of a round execution: only rounds with a broadcaster are kept."""

    start: int
    end: int
    records: list[RoundRecord] = field(default_factory=list)
    digest: dict = field(default_factory=dict)

    @property
    def rounds_run(self) -> int:
        return self.end - self.start

    def to_dict(self, graph: DualGraph | None = None) -> dict:
        rounds = []
        for rec in self.records:
            rounds.append({
                "round": rec.round,
                "broadcasts": [[v, _plain(p)] for v, p in sorted(rec.broadcasts.items())],
                "deliveries": [
                    [v, [[u, _plain(rec.broadcasts[u]),
                          None if graph is None else graph.is_reliable(u, v)] for u in us]]
                    for v, us in sorted(rec.deliveries.items())
                ],
            })
        return {"start": self.start, "end": self.end, "rounds": rounds}

    def to_json(self, graph: DualGraph | None = None) -> str:
        return json.dumps(self.to_dict(graph), separators=(",", ":"))


def _plain(p):
    return list(p) if isinstance(p, tuple) else p


def concat(traces: list[RoundTrace]) -> RoundTrace:
    if not traces:
        return RoundTrace(0, 0)
    out = RoundTrace(traces[0].start, traces[-1].end)
    for rt in traces:
        out.records.extend(rt.records)
    return out


def run_rounds(
    graph: DualGraph,
    protocol: RoundProtocol,
    adversary: RoundAdversary,
    max_rounds: int,
    seed=0,
    start: int = 0,
    record: bool = True,
) -> RoundTrace:
    """Run up to ``max_rounds`` lock-step rounds, numbered from ``start``.

    Stops early when ``protocol.done(r)`` holds before round ``r``.  Raises
    :class:`AdversaryError` if the adversary breaks (R1), (R2) or the
    E'-neighbor rule.
    """
    rng = random.Random(f"{seed}/adversary")
    rt = RoundTrace(start, start)
    r = start
    for r in range(start, start + max_rounds):
        if protocol.done(r):
            break
        intents = dict(protocol.intents(r))
        if intents:
            chosen = adversary.choose(r, intents, graph, rng)
            _validate_round(r, intents, chosen, graph)
        else:
            chosen = {}
        deliveries = {
            v: [(u, intents[u], u in graph.nbr_g[v]) for u in us] for v, us in chosen.items()
        }
        protocol.receive(r, deliveries)
        if record and intents:
            rt.records.append(RoundRecord(r, intents, {v: list(us) for v, us in chosen.items()}))
    else:
        r = start + max_rounds
    rt.end = r
    rt.digest = protocol.digest()
    return rt


def _validate_round(r: int, intents: Mapping[int, Any], chosen: Mapping[int, list[int]],
                    graph: DualGraph) -> None:
    for v, us in chosen.items():
        if v in intents:
            raise AdversaryError(f"broadcaster {v} was given deliveries", r, v)
        if not us:
            raise AdversaryError(f"empty delivery list for node {v}", r, v)
        if len(set(us)) != len(us):
            raise AdversaryError(f"duplicate sender delivered to node {v}", r, v)
        for u in us:
            if u not in intents or u not in graph.nbr_gp[v]:
                raise AdversaryError(f"node {v} cannot hear {u} in this round", r, v)
    for u in intents:
        for v in graph.adj_g[u]:
            if v not in intents and v not in chosen:
                raise AdversaryError(f"silent node {v} hears nothing although G-neighbor {u} broadcasts", r, v)


def check_round_rules(rt: RoundTrace, graph: DualGraph) -> list[str]:
    """Structural (R1)/(R2)/range audit of a recorded round trace."""
    problems = []
    for rec in rt.records:
        try:
            _validate_round(rec.round, rec.broadcasts, rec.deliveries, graph)
        except AdversaryError as exc:
            problems.append(str(exc))
    return problems


def lower_to_trace(rt: RoundTrace, config: EngineConfig, graph: DualGraph | None = None) -> Trace:
    """Engine trace of a round execution.

    Round ``r`` broadcasts start at ``r * f_prog``, deliveries happen at the
    middle of the round and every instance is aborted at ``(r + 1) * f_prog``,
    before the next round's broadcasts.
    """
    if config.model != ENHANCED:
        config = dataclasses.replace(config, model=ENHANCED)
    f = config.f_prog
    half = f / 2
    events: list[Event] = []
    iid = 0

    def log(t, kind, node, instance=None, payload=None, sender=None, reliable=None):
        events.append(Event(len(events), t, kind, node, instance, payload, sender, reliable))

    for rec in rt.records:
        t0 = rec.round * f
        ids = {}
        for v in sorted(rec.broadcasts):
            ids[v] = iid
            log(t0, "bcast", v, iid, rec.broadcasts[v])
            iid += 1
        for v in sorted(rec.deliveries):
            for u in rec.deliveries[v]:
                reliable = None if graph is None else graph.is_reliable(u, v)
                log(t0 + half, "rcv", v, ids[u], rec.broadcasts[u], u, reliable)
        for v in sorted(rec.broadcasts):
            log(t0 + f, "abort", v, ids[v], rec.broadcasts[v])
    horizon = Fraction(rt.end) * f
    return Trace(events=events, graph=graph, config=config, truncated=False, horizon=horizon)
