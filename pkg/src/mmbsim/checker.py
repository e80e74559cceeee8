"""Post-hoc validation of a trace against the abstract MAC layer guarantees.

:func:`check` reports every breach of well-formedness, receive correctness,
acknowledgment correctness, termination, the acknowledgment bound, the
progress bound and the abort bound.  Each violation cites the offending
events by ``seq``.

Progress bound
--------------
For a node ``j`` and a window ``[s, e]`` with ``e - s > f_prog``: if some
instance from a G-neighbor of ``j`` spans the window (``bcast <= s`` and
``termination >= e``), then ``j`` must have a ``rcv`` at time ``<= e`` of an
instance from an E'-neighbor whose termination is ``>= s``.  The default
reading lets that ``rcv`` precede ``s``; ``strict=True`` also requires it to
be ``>= s``.

Fix ``s``.  Let ``A(s)`` be the latest end among spanning candidates
(``bcast <= s``) and ``R(s)`` the earliest qualifying ``rcv`` time.  A
violating ``e`` exists iff ``s + f_prog < min(A(s), R(s))``.  Both ``A`` and
``R`` are step functions that change only at ``bcast`` times (inclusive) and
just after termination (or, in strict mode, ``rcv``) times, and
``min(A, R) - s`` decreases between steps, so it suffices to test those
points.  :func:`progress_oracle` is an independent brute-force check of the
same definition on a rational grid.
"""

from __future__ import annotations

import bisect
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import TraceParseError
from .graph import DualGraph
from .rational import fmt_time
from .trace import ENHANCED, EngineConfig, Trace

KINDS = (
    "well-formedness",
    "receive-correctness",
    "ack-correctness",
    "termination",
    "ack-bound",
    "progress-bound",
    "abort-bound",
)


@dataclass(frozen=True)
class Violation:
    kind: str
    nodes: tuple[int, ...]
    instances: tuple[int, ...]
    seqs: tuple[int, ...]
    detail: str
    window: tuple[Fraction, Fraction] | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "nodes": list(self.nodes),
            "instances": list(self.instances),
            "seqs": list(self.seqs),
            "window": None if self.window is None else [fmt_time(t) for t in self.window],
            "detail": self.detail,
        }


@dataclass
class ViolationReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def counts(self) -> Counter:
        return Counter(v.kind for v in self.violations)

    def of_kind(self, kind: str) -> list[Violation]:
        return [v for v in self.violations if v.kind == kind]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "counts": dict(sorted(self.counts().items())),
            "violations": [v.to_dict() for v in self.violations],
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _validate(trace: Trace, graph: DualGraph) -> None:
    prev = None
    bcasts: set[int] = set()
    for ev in trace.events:
        if prev is not None:
            if ev.time < prev.time:
                raise TraceParseError(f"event seq {ev.seq} at t={ev.time} precedes seq {prev.seq} at t={prev.time}")
            if ev.seq <= prev.seq:
                raise TraceParseError(f"seq not strictly increasing at seq {ev.seq}")
        if ev.time < 0:
            raise TraceParseError(f"negative time at seq {ev.seq}")
        if not 0 <= ev.node < graph.n:
            raise TraceParseError(f"event seq {ev.seq} names unknown node {ev.node}")
        if ev.kind == "bcast":
            if ev.instance is None or ev.instance in bcasts:
                raise TraceParseError(f"bcast seq {ev.seq} has missing or reused instance id {ev.instance}")
            bcasts.add(ev.instance)
        elif ev.kind in ("rcv", "ack", "abort"):
            if ev.instance not in bcasts:
                raise TraceParseError(f"event seq {ev.seq} refers to unknown instance {ev.instance}")
        prev = ev


def check(
    trace: Trace,
    graph: DualGraph | None = None,
    config: EngineConfig | None = None,
    strict: bool = False,
) -> ViolationReport:
    """Validate ``trace``; raises :class:`TraceParseError` if it is malformed."""
    graph = graph if graph is not None else trace.graph
    config = config if config is not None else trace.config
    if graph is None or config is None:
        raise TraceParseError("check needs the graph and engine config of the trace")
    _validate(trace, graph)
    report = ViolationReport()
    add = report.violations.append

    sender: dict[int, int] = {}
    bcast_ev: dict[int, object] = {}
    term: dict[int, object] = {}
    delivered: dict[int, dict[int, int]] = {}
    busy: dict[int, int] = {}

    for ev in trace.events:
        k = ev.kind
        if k == "bcast":
            sender[ev.instance] = ev.node
            bcast_ev[ev.instance] = ev
            delivered[ev.instance] = {}
            if ev.node in busy:
                prior = busy[ev.node]
                add(Violation(
                    "well-formedness", (ev.node,), (prior, ev.instance),
                    (bcast_ev[prior].seq, ev.seq),
                    f"node {ev.node} broadcast instance {ev.instance} while instance {prior} was unterminated",
                ))
            busy[ev.node] = ev.instance
        elif k == "rcv":
            iid, j, src = ev.instance, ev.node, sender[ev.instance]
            b = bcast_ev[iid]
            if j == src or j not in graph.nbr_gp[src]:
                add(Violation("receive-correctness", (j, src), (iid,), (b.seq, ev.seq),
                              f"node {j} received instance {iid} but is not an E' neighbor of sender {src}"))
            elif (ev.sender is not None and ev.sender != src) or (
                ev.reliable is not None and ev.reliable != (j in graph.nbr_g[src])
            ):
                add(Violation("receive-correctness", (j, src), (iid,), (ev.seq,),
                              f"rcv seq {ev.seq} misreports its sender or reliability"))
            if j in delivered[iid]:
                add(Violation("receive-correctness", (j,), (iid,), (delivered[iid][j], ev.seq),
                              f"node {j} received instance {iid} twice"))
            else:
                delivered[iid][j] = ev.seq
            t = term.get(iid)
            if t is not None:
                if t.kind == "ack":
                    add(Violation("receive-correctness", (j,), (iid,), (t.seq, ev.seq),
                                  f"node {j} received instance {iid} after its ack"))
                elif ev.time > t.time + config.eps_abort:
                    add(Violation("abort-bound", (j,), (iid,), (t.seq, ev.seq),
                                  f"node {j} received instance {iid} at {ev.time}, more than eps_abort "
                                  f"after its abort at {t.time}"))
        elif k in ("ack", "abort"):
            iid = ev.instance
            src = sender[iid]
            b = bcast_ev[iid]
            if ev.node != src:
                add(Violation("ack-correctness", (ev.node, src), (iid,), (ev.seq,),
                              f"{k} of instance {iid} reported at node {ev.node}, not its sender {src}"))
            if iid in term:
                add(Violation("ack-correctness", (src,), (iid,), (term[iid].seq, ev.seq),
                              f"instance {iid} terminated twice"))
                continue
            term[iid] = ev
            if busy.get(src) == iid:
                del busy[src]
            if k == "abort" and config.model != ENHANCED:
                add(Violation("well-formedness", (src,), (iid,), (ev.seq,),
                              f"node {src} aborted instance {iid} in the standard model"))
            if k == "ack":
                missing = [v for v in graph.adj_g[src] if v not in delivered[iid]]
                if missing:
                    add(Violation("ack-correctness", (src, *missing), (iid,), (b.seq, ev.seq),
                                  f"instance {iid} acked before G-neighbors {missing} received it"))
            if ev.time > b.time + config.f_ack:
                add(Violation("ack-bound", (src,), (iid,), (b.seq, ev.seq),
                              f"instance {iid} terminated at {ev.time} > bcast {b.time} + f_ack",
                              (b.time, ev.time)))

    end = trace.end_time
    for iid, b in bcast_ev.items():
        if iid in term:
            continue
        if b.time + config.f_ack < end:
            add(Violation("ack-bound", (b.node,), (iid,), (b.seq,),
                          f"instance {iid} still open at {end} > bcast {b.time} + f_ack", (b.time, end)))
        elif trace.truncated:
            report.warnings.append(f"instance {iid} of node {b.node} open at horizon {end}")
        if not trace.truncated:
            add(Violation("termination", (b.node,), (iid,), (b.seq,),
                          f"instance {iid} of node {b.node} never terminated"))

    report.violations.extend(_progress(trace, graph, config, strict))
    return report


def _instance_table(trace: Trace):
    """Per instance: (sender, bcast time, bcast seq, end time clipped to trace end)."""
    end = trace.end_time
    table = {}
    for iid, inst in trace.instances().items():
        stop = end if inst.end is None else min(inst.end, end)
        table[iid] = (inst.sender, inst.bcast_at, inst.bcast_seq, stop, inst)
    return table


def _progress(trace: Trace, graph: DualGraph, config: EngineConfig, strict: bool) -> list[Violation]:
    # Times are rescaled to integers (exactly, by the common denominator) so
    # the comparisons below stay cheap on long traces.
    table = _instance_table(trace)
    unit = math.lcm(config.f_prog.denominator, trace.end_time.denominator,
                    *{ev.time.denominator for ev in trace.events})

    def z(t: Fraction) -> int:
        return t.numerator * (unit // t.denominator)

    f_prog = z(config.f_prog)
    spans: list[list[tuple[int, int, int]]] = [[] for _ in range(graph.n)]
    for iid, (src, b, _, stop, _) in table.items():
        for j in graph.adj_g[src]:
            spans[j].append((z(b), z(stop), iid))
    covers: list[list[tuple[int, int]]] = [[] for _ in range(graph.n)]
    for ev in trace.events:
        if ev.kind == "rcv":
            src, _, _, stop, _ = table[ev.instance]
            if src in graph.nbr_gp[ev.node]:
                key = min(stop, ev.time) if strict else stop
                covers[ev.node].append((z(key), z(ev.time)))

    out = []
    for j in range(graph.n):
        if not spans[j]:
            continue
        cand = sorted(spans[j])
        bs = [c[0] for c in cand]
        best, best_i, arg = [], None, []
        for i, (_, stop, _) in enumerate(cand):
            if best_i is None or stop > cand[best_i][1]:
                best_i = i
            best.append(cand[best_i][1])
            arg.append(cand[best_i][2])
        cov = sorted(covers[j])
        keys = [c[0] for c in cov]
        suffix = [math.inf] * (len(cov) + 1)
        for i in range(len(cov) - 1, -1, -1):
            suffix[i] = min(cov[i][1], suffix[i + 1])

        def a_at(s):
            i = bisect.bisect_right(bs, s) - 1
            return (best[i], arg[i]) if i >= 0 else (None, None)

        points = [(b, False) for b in bs] + [(k, True) for k in keys]
        reported: set[int] = set()
        for s, after in points:
            a, iid = a_at(s)
            if a is None or iid in reported:
                continue
            lo = bisect.bisect_right(keys, s) if after else bisect.bisect_left(keys, s)
            r = suffix[lo]
            e = a if r == math.inf else min(a, r)
            if s + f_prog < e:
                reported.add(iid)
                src, b, bseq, _, inst = table[iid]
                seqs = (bseq,) if inst.terminated is None else (bseq, inst.terminated[2])
                s_t, e_t = Fraction(s, unit), Fraction(e, unit)
                where = f"just after {s_t}" if after else f"at {s_t}"
                out.append(Violation(
                    "progress-bound", (j, src), (iid,), seqs,
                    f"node {j} received nothing qualifying in a window starting {where} and ending "
                    f"before {e_t}, while instance {iid} of G-neighbor {src} was open",
                    (s_t, e_t),
                ))
    return out


def progress_oracle(
    trace: Trace, graph: DualGraph | None = None, config: EngineConfig | None = None, strict: bool = False
) -> set[int]:
    """Nodes with a progress-bound violation, by direct search over a fine grid.

    Every event time and ``f_prog`` is a multiple of ``1/L``; with
    ``delta = 1/(3L)`` it suffices to try windows ``[s, s + f_prog + delta]``
    for ``s`` in ``{t, t + delta}`` over event times ``t``.  Quadratic;
    meant for small traces.
    """
    graph = graph if graph is not None else trace.graph
    config = config if config is not None else trace.config
    f_prog = config.f_prog
    table = _instance_table(trace)
    times = {ev.time for ev in trace.events} | {trace.end_time}
    lcm = f_prog.denominator
    for t in times:
        lcm = math.lcm(lcm, t.denominator)
    delta = Fraction(1, 3 * lcm)
    starts = sorted(times | {t + delta for t in times})
    rcvs = [(ev.node, ev.time, table[ev.instance][0], table[ev.instance][3])
            for ev in trace.events if ev.kind == "rcv"]
    bad = set()
    for j in range(graph.n):
        spanning = [(b, stop) for src, b, _, stop, _ in table.values() if src in graph.nbr_g[j]]
        if not spanning:
            continue
        mine = [(t, stop) for node, t, src, stop in rcvs if node == j and src in graph.nbr_gp[j]]
        for s in starts:
            e = s + f_prog + delta
            if not any(b <= s and stop >= e for b, stop in spanning):
                continue
            if not any(t <= e and stop >= s and (not strict or t >= s) for t, stop in mine):
                bad.add(j)
                break
    return bad


def progress_nodes(report: ViolationReport) -> set[int]:
    """Nodes named as the starved listener in progress-bound violations."""
    return {v.nodes[0] for v in report.of_kind("progress-bound")}

