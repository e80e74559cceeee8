"""Fast Multi-Message Broadcast on lock-step rounds.

Four stages, each a :class:`~mmbsim.rounds.RoundProtocol`:

1. **MIS** — phases of an election part (bit-string contest, ``4 log n``
   rounds) and an announcement part (new members broadcast their ID with
   probability ``p_act``; a reliable announcement silences listeners).
2. **Gather** — 3-round periods (MIS announce, owner sends a message, MIS
   acknowledges) that move every message to a nearby MIS node.
3. **Overlay** — MIS nodes within 3 G-hops become neighbors.
4. **Spread** — phases of a 3-round-period local broadcast with relays; each
   MIS node sends one not-yet-sent message per phase.

Stage lengths are fixed round budgets (nodes cannot detect termination);
a stage stops simulating early only when the remaining rounds can no longer
change any state, and its reported length is still the full budget.  Spread
is measured up to the first round at which every node holds every message
of its component.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import PreconditionViolation, StageError
from .graph import DualGraph, bfs, metrics
from .rounds import RoundAdversary, RoundProtocol, RoundTrace, concat, run_rounds

ACTIVE, TEMP, PERM, MEMBER = "active", "temp-inactive", "perm-inactive", "in-MIS"


def log2n(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


@dataclass(frozen=True)
class FmmbParams:
    """Constants the protocol leaves as Θ(·).

    Round counts, with ``L = ceil(log2 n)``:
    election ``4L``; announcement ``ceil(A * ceil(c² L))``;
    MIS phases ``ceil(B * ceil(c² L²))``; gather periods
    ``ceil(Cg * ceil(c² (k + L)))``; local-broadcast periods
    ``ceil(Cs * ceil(c² L))``; spread phases ``spread_factor * (D + k)``.

    ``relay_unreliable`` lets spread relays forward copies heard over E'-only
    links; with ``False`` only G-neighbor receptions are relayed.
    """

    c: float = 1.5
    p_act: float | None = None
    A: float = 8.0
    B: float = 0.25
    Cg: float = 8.0
    Cs: float = 8.0
    spread_factor: int = 2
    relay_unreliable: bool = True

    def __post_init__(self):
        p = self.activation
        if not 0 < p <= 0.25:
            raise ValueError("p_act must lie in (0, 1/4]")
        if self.c < 1 or min(self.A, self.B, self.Cg, self.Cs) <= 0 or self.spread_factor < 1:
            raise ValueError("FMMB constants must be positive and c >= 1")

    @property
    def activation(self) -> float:
        if self.p_act is not None:
            return self.p_act
        return min(1 / (4 * self.c ** 2), 0.25)

    def election_rounds(self, n: int) -> int:
        return 4 * log2n(n)

    def announce_rounds(self, n: int) -> int:
        return max(1, math.ceil(self.A * math.ceil(self.c ** 2 * log2n(n))))

    def mis_phases(self, n: int) -> int:
        return max(1, math.ceil(self.B * math.ceil(self.c ** 2 * log2n(n) ** 2)))

    def mis_rounds(self, n: int) -> int:
        return self.mis_phases(n) * (self.election_rounds(n) + self.announce_rounds(n))

    def gather_periods(self, n: int, k: int) -> int:
        return max(1, math.ceil(self.Cg * math.ceil(self.c ** 2 * (k + log2n(n)))))

    def localbcast_periods(self, n: int) -> int:
        return max(1, math.ceil(self.Cs * math.ceil(self.c ** 2 * log2n(n))))

    def spread_phases(self, diameter: int, k: int) -> int:
        return max(1, self.spread_factor * (diameter + k))


def _node_rngs(n: int, seed, stage: str) -> list[random.Random]:
    return [random.Random(f"{seed}/{stage}/node/{v}") for v in range(n)]


# -- MIS ---------------------------------------------------------------


class MisProtocol(RoundProtocol):
    def __init__(self, graph: DualGraph, params: FmmbParams, seed, start: int = 0):
        n = graph.n
        self.graph = graph
        self.start = start
        self.p = params.activation
        self.bits = params.election_rounds(n)
        self.phase_len = self.bits + params.announce_rounds(n)
        self.rng = _node_rngs(n, seed, "mis")
        self.status = [ACTIVE] * n
        self.b = [0] * n
        self.members: list[int] = []
        self.new: list[int] = []
        self.joined_phase: dict[int, int] = {}

    def done(self, r):
        return (r - self.start) % self.phase_len == 0 and ACTIVE not in self.status

    def intents(self, r):
        phase, pos = divmod(r - self.start, self.phase_len)
        if pos == 0:
            for v, st in enumerate(self.status):
                if st == ACTIVE:
                    self.b[v] = self.rng[v].getrandbits(self.bits)
        if pos < self.bits:
            return {v: ("elect", v) for v, st in enumerate(self.status)
                    if st == ACTIVE and (self.b[v] >> pos) & 1}
        return {v: ("mis", v) for v in self.new if self.rng[v].random() < self.p}

    def receive(self, r, deliveries):
        phase, pos = divmod(r - self.start, self.phase_len)
        status, nbr_g = self.status, self.graph.nbr_g
        if pos < self.bits:
            for v in deliveries:
                if status[v] == ACTIVE:
                    status[v] = TEMP
            if pos == self.bits - 1:
                self.new = [v for v, st in enumerate(status) if st == ACTIVE]
                for v in self.new:
                    status[v] = MEMBER
                    self.joined_phase[v] = phase
                self.members.extend(self.new)
        else:
            for v, got in deliveries.items():
                if status[v] in (ACTIVE, TEMP) and any(u in nbr_g[v] for u, _, _ in got):
                    status[v] = PERM
        if pos == self.phase_len - 1:
            for v in self.new:
                status[v] = PERM
            self.new = []
            for v, st in enumerate(status):
                if st == TEMP:
                    status[v] = ACTIVE

    def digest(self):
        return {"mis": sorted(self.members)}


@dataclass
class MisResult:
    members: frozenset[int]
    rounds: int
    trace: RoundTrace
    joined_phase: dict[int, int]


def mis(graph: DualGraph, params: FmmbParams, adversary: RoundAdversary, seed=0,
        start: int = 0, record: bool = True) -> MisResult:
    proto = MisProtocol(graph, params, seed, start)
    budget = params.mis_rounds(graph.n)
    rt = run_rounds(graph, proto, adversary, budget, seed=f"{seed}/mis", start=start, record=record)
    return MisResult(frozenset(proto.members), budget, rt, proto.joined_phase)


def verify_mis(graph: DualGraph, S) -> tuple[bool, tuple | None]:
    """``(True, None)`` for a maximal G-independent set, else ``(False, witness)``.

    The witness is ``("edge", u, v)`` for two adjacent members or
    ``("undominated", v)`` for an uncovered vertex.
    """
    S = set(S)
    for u, v in sorted(graph.edges_g):
        if u in S and v in S:
            return False, ("edge", u, v)
    for v in range(graph.n):
        if v not in S and not (graph.nbr_g[v] & S):
            return False, ("undominated", v)
    return True, None


# -- Gather -------------------------------------------------------------


class GatherProtocol(RoundProtocol):
    def __init__(self, graph: DualGraph, S: frozenset[int], owned: Mapping[int, list],
                 params: FmmbParams, seed, known: list[set], start: int = 0):
        self.graph = graph
        self.start = start
        self.S = S
        self.p = params.activation
        self.rng = _node_rngs(graph.n, seed, "gather")
        self.M: list[dict] = [dict.fromkeys(owned.get(v, ())) for v in range(graph.n)]
        self.known = known
        self.heard: set[int] = set()
        self.pending: dict[int, Any] = {}
        self.outstanding = sum(len(self.M[v]) for v in range(graph.n) if v not in S)

    def done(self, r):
        return (r - self.start) % 3 == 0 and self.outstanding == 0

    def intents(self, r):
        sub = (r - self.start) % 3
        if sub == 0:
            self.heard = set()
            self.pending = {}
            return {u: ("ann", u) for u in sorted(self.S) if self.rng[u].random() < self.p}
        if sub == 1:
            return {v: ("msg", next(iter(self.M[v])), v) for v in sorted(self.heard) if self.M[v]}
        return {u: ("ack", m, u) for u, m in sorted(self.pending.items())}

    def receive(self, r, deliveries):
        sub = (r - self.start) % 3
        nbr_g, S = self.graph.nbr_g, self.S
        for v, got in deliveries.items():
            for u, payload, reliable in got:
                if payload[0] != "ann":
                    self.known[v].add(payload[1])
                if not reliable:
                    continue
                if sub == 0 and v not in S:
                    self.heard.add(v)
                elif sub == 1 and v in S and payload[0] == "msg":
                    m = payload[1]
                    self.M[v][m] = None
                    self.pending[v] = m
                elif sub == 2 and v not in S and payload[0] == "ack":
                    if self.M[v].pop(payload[1], 0) is None:
                        self.outstanding -= 1

    def digest(self):
        return {"owned": {v: sorted(self.M[v]) for v in range(len(self.M)) if self.M[v]}}


@dataclass
class GatherResult:
    message_sets: list[dict]
    rounds: int
    trace: RoundTrace

    def owned_by_mis(self, S) -> set:
        out = set()
        for v in S:
            out.update(self.message_sets[v])
        return out


def gather(graph: DualGraph, S, owned: Mapping[int, list], params: FmmbParams,
           adversary: RoundAdversary, seed=0, start: int = 0, record: bool = True,
           known: list[set] | None = None) -> GatherResult:
    S = frozenset(S)
    ok, witness = verify_mis(graph, S)
    if not ok:
        raise PreconditionViolation(f"gather needs a maximal independent set; witness {witness}")
    if known is None:
        known = [set(owned.get(v, ())) for v in range(graph.n)]
    k = len({m for ms in owned.values() for m in ms})
    proto = GatherProtocol(graph, S, owned, params, seed, known, start)
    budget = 3 * params.gather_periods(graph.n, k)
    rt = run_rounds(graph, proto, adversary, budget, seed=f"{seed}/gather", start=start, record=record)
    return GatherResult(proto.M, budget, rt)


# -- Overlay --------------------------------------------------------------


@dataclass
class Overlay:
    members: tuple[int, ...]
    edges: frozenset[tuple[int, int]]
    diameter: int

    def adjacency(self) -> dict[int, list[int]]:
        adj = {v: [] for v in self.members}
        for u, v in sorted(self.edges):
            adj[u].append(v)
            adj[v].append(u)
        return adj


def overlay(graph: DualGraph, S) -> Overlay:
    members = tuple(sorted(S))
    Sset = set(members)
    edges = set()
    for u in members:
        for v, d in graph.dist_g[u].items():
            if v != u and v in Sset and d <= 3:
                edges.add((min(u, v), max(u, v)))
    index = {v: i for i, v in enumerate(members)}
    adj = [[] for _ in members]
    for u, v in edges:
        adj[index[u]].append(index[v])
        adj[index[v]].append(index[u])
    diameter = 0
    for i in range(len(members)):
        diameter = max(diameter, max(bfs(adj, i).values()))
    return Overlay(members, frozenset(edges), diameter)


# -- Spread ---------------------------------------------------------------


class SpreadProtocol(RoundProtocol):
    def __init__(self, graph: DualGraph, S: frozenset[int], message_sets: list[dict],
                 params: FmmbParams, seed, known: list[set], targets: list[frozenset],
                 start: int = 0):
        n = graph.n
        self.graph = graph
        self.start = start
        self.S = sorted(S)
        self.Sset = S
        self.p = params.activation
        self.relay_unreliable = params.relay_unreliable
        self.period_count = params.localbcast_periods(n)
        self.phase_len = 3 * self.period_count
        self.rng = _node_rngs(n, seed, "spread")
        self.M = [dict(message_sets[v]) if v in S else {} for v in range(n)]
        self.sent: list[dict] = [{} for _ in range(n)]
        self.m: dict[int, Any] = {}
        self.got_phase: dict[int, dict] = {v: {} for v in self.S}
        self.relay: dict[int, Any] = {}
        self.known = known
        self.missing = [set(targets[v]) - known[v] for v in range(n)]
        self.missing_total = sum(len(x) for x in self.missing)
        self.completed_at: int | None = None
        self.stalled = False

    def done(self, r):
        if self.missing_total == 0:
            # Stopping mid-phase: apply the phase-end merge of what MIS nodes heard.
            for v in self.S:
                self.M[v].update(self.got_phase[v])
                self.got_phase[v] = {}
            return True
        if (r - self.start) % self.phase_len == 0 and not any(
            any(m not in self.sent[v] for m in self.M[v]) for v in self.S
        ):
            self.stalled = True
            return True
        return False

    def intents(self, r):
        pos = (r - self.start) % self.phase_len
        if pos == 0:
            self.m = {}
            for v in self.S:
                fresh = next((m for m in self.M[v] if m not in self.sent[v]), None)
                if fresh is not None:
                    self.m[v] = fresh
        if pos % 3 == 0:
            self.relay = {}
            active = [v for v in self.S if self.rng[v].random() < self.p]
            return {v: ("spr", self.m[v]) for v in active if v in self.m}
        relay, self.relay = self.relay, {}
        return relay

    def receive(self, r, deliveries):
        pos = (r - self.start) % self.phase_len
        last_sub = pos % 3 == 2
        for v, got in deliveries.items():
            for u, payload, reliable in got:
                m = payload[1]
                if m not in self.known[v]:
                    self.known[v].add(m)
                    if m in self.missing[v]:
                        self.missing[v].discard(m)
                        self.missing_total -= 1
                if v in self.Sset:
                    self.got_phase[v][m] = None
                if (reliable or self.relay_unreliable) and not last_sub:
                    self.relay[v] = payload
        if pos == self.phase_len - 1:
            for v in self.S:
                if v in self.m:
                    self.sent[v][self.m[v]] = None
                self.M[v].update(self.got_phase[v])
                self.got_phase[v] = {}

    def digest(self):
        return {"mis_sets": {v: sorted(self.M[v]) for v in self.S}}


@dataclass
class SpreadResult:
    message_sets: list[dict]
    sent_sets: list[dict]
    rounds: int
    complete: bool
    phases_budget: int
    trace: RoundTrace
    missing: int


def spread(graph: DualGraph, S, ov: Overlay, message_sets: list[dict], params: FmmbParams,
           adversary: RoundAdversary, seed=0, start: int = 0, record: bool = True,
           known: list[set] | None = None, targets: list[frozenset] | None = None,
           k: int | None = None) -> SpreadResult:
    """Pipelined spreading; runs until every node holds its targets or the budget ends.

    ``targets[v]`` is the set of messages node ``v`` must end up with
    (default: every message held by an MIS node of its G-component).
    """
    S = frozenset(S)
    n = graph.n
    if known is None:
        known = [set(message_sets[v]) for v in range(n)]
    if targets is None:
        comp = graph.component_of
        per_comp: dict[int, set] = {}
        for v in S:
            per_comp.setdefault(comp[v], set()).update(message_sets[v])
        targets = [frozenset(per_comp.get(comp[v], ())) for v in range(n)]
    if k is None:
        k = len(set().union(*targets)) if targets else 0
    proto = SpreadProtocol(graph, S, message_sets, params, seed, known, targets, start)
    phases = params.spread_phases(metrics(graph).diameter_g, k)
    budget = phases * proto.phase_len
    rt = run_rounds(graph, proto, adversary, budget, seed=f"{seed}/spread", start=start, record=record)
    complete = proto.missing_total == 0
    return SpreadResult(proto.M, proto.sent, rt.rounds_run, complete, phases, rt, proto.missing_total)


# -- Full run ---------------------------------------------------------------


@dataclass
class FmmbResult:
    delivered: list[set]
    complete: bool
    rounds: int
    stage_rounds: dict[str, int]
    mis: frozenset[int]
    mis_valid: bool
    overlay_diameter: int
    diameter_g: int
    owned_by_mis: bool
    traces: dict[str, RoundTrace] = field(default_factory=dict)

    def round_trace(self) -> RoundTrace:
        return concat([self.traces[s] for s in ("mis", "gather", "spread") if s in self.traces])


def fmmb_run(graph: DualGraph, arrivals: Mapping[int, list], params: FmmbParams | None = None,
             adversary: RoundAdversary | None = None, seed=0, record: bool = False) -> FmmbResult:
    """MIS, gather, overlay and spread composed; raises :class:`StageError` on stage failure."""
    from .rounds import SpitefulAdversary

    params = params or FmmbParams()
    adversary = adversary or SpitefulAdversary()
    n = graph.n
    origin = {m: v for v, ms in arrivals.items() for m in ms}
    k = len(origin)
    comp = graph.component_of
    targets = [frozenset(m for m, u in origin.items() if comp[u] == comp[v]) for v in range(n)]
    known = [set(arrivals.get(v, ())) for v in range(n)]
    traces = {}

    mres = mis(graph, params, adversary, seed, start=0, record=record)
    traces["mis"] = mres.trace
    valid, witness = verify_mis(graph, mres.members)
    if not valid:
        raise StageError("mis", PreconditionViolation(f"not a maximal independent set: {witness}"))
    t = mres.rounds

    try:
        gres = gather(graph, mres.members, arrivals, params, adversary, seed, start=t,
                      record=record, known=known)
    except Exception as exc:
        raise StageError("gather", exc) from exc
    traces["gather"] = gres.trace
    t += gres.rounds
    owned = gres.owned_by_mis(mres.members)

    ov = overlay(graph, mres.members)
    try:
        sres = spread(graph, mres.members, ov, gres.message_sets, params, adversary, seed,
                      start=t, record=record, known=known, targets=targets, k=k)
    except Exception as exc:
        raise StageError("spread", exc) from exc
    traces["spread"] = sres.trace
    stage_rounds = {"mis": mres.rounds, "gather": gres.rounds, "spread": sres.rounds}
    return FmmbResult(
        delivered=known,
        complete=sres.complete,
        rounds=sum(stage_rounds.values()),
        stage_rounds=stage_rounds,
        mis=mres.members,
        mis_valid=valid,
        overlay_diameter=ov.diameter,
        diameter_g=metrics(graph).diameter_g,
        owned_by_mis=owned >= set(origin),
        traces=traces,
    )


def round_budget(n: int, diameter: int, k: int) -> int:
    """``64 (D L + k L + L³)`` rounds with ``L = ceil(log2 n)``."""
    L = log2n(n)
    return 64 * (diameter * L + k * L + L ** 3)
